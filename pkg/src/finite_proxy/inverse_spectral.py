"""Jacobi matrices, their spectra, and persymmetric spring-mass recovery.

Forward direction: a fixed-fixed chain of N masses and N+1 springs has
stiffness matrix K = tridiag(-k_{i+1}; k_i + k_{i+1}; -k_{i+1}) and the
similarity transform J = D^{-1} K D^{-1} with D = diag(sqrt(m_i)) is a
Jacobi matrix (positive semi-definite, symmetric tridiagonal, strictly
negative codiagonal) whose eigenvalues are the squared modal frequencies.

Inverse direction: given a strictly increasing spectrum, the unique
persymmetric Jacobi matrix is rebuilt by the Lanczos recursion seeded with
the persymmetric weight vector, and masses/springs are recovered from the
boundary row-sum identity J d = e_1 + e_N (d = square roots of the
masses), then rescaled to the prescribed total mass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal, solveh_banded

from .errors import (
    DegenerateSpectrumError,
    DomainError,
    ReconstructionError,
)

PERSYMMETRY_TOL = 1e-10
ROUND_TRIP_TOL = 1e-9


@dataclass(frozen=True)
class Spectrum:
    """Strictly increasing eigenvalue sequence, each >= 0."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.atleast_1d(np.asarray(self.values, dtype=float)).copy()
        if vals.ndim != 1 or vals.size < 1:
            raise DomainError("spectrum must be a nonempty 1-D sequence")
        if np.any(vals < 0):
            raise DomainError("spectrum values must be nonnegative")
        if np.any(np.diff(vals) <= 0):
            raise DegenerateSpectrumError(
                "spectrum must be strictly increasing (distinct eigenvalues)"
            )
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return int(self.values.size)


@dataclass(frozen=True)
class JacobiMatrix:
    """Symmetric tridiagonal with codiagonal entries -offdiag (offdiag > 0)."""

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.diag, dtype=float)).copy()
        e = np.asarray(self.offdiag, dtype=float).reshape(-1).copy()
        if d.size < 1 or e.size != d.size - 1:
            raise DomainError(
                f"need N diagonal and N-1 codiagonal entries, got {d.size}/{e.size}"
            )
        if np.any(e <= 0):
            raise DomainError("codiagonal magnitudes must be strictly positive")
        scale = max(np.max(np.abs(d)), np.max(np.abs(e)) if e.size else 0.0, 1.0)
        lo = eigh_tridiagonal(d, -e, eigvals_only=True, select="i",
                              select_range=(0, 0))[0] if d.size > 1 else d[0]
        if lo < -1e-12 * scale:
            raise DomainError(
                f"matrix is not positive semi-definite (lowest eigenvalue {lo:.3e})"
            )
        d.flags.writeable = False
        e.flags.writeable = False
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "offdiag", e)

    @property
    def n(self) -> int:
        return int(self.diag.size)

    def matrix(self) -> np.ndarray:
        """Assembled dense matrix (negative codiagonal)."""
        m = np.diag(self.diag)
        idx = np.arange(self.n - 1)
        m[idx, idx + 1] = -self.offdiag
        m[idx + 1, idx] = -self.offdiag
        return m

    def is_persymmetric(self, tol: float = PERSYMMETRY_TOL) -> bool:
        scale = max(float(np.max(np.abs(self.diag))), 1.0)
        d_ok = np.allclose(self.diag, self.diag[::-1], rtol=0.0, atol=tol * scale)
        e_ok = self.offdiag.size == 0 or np.allclose(
            self.offdiag, self.offdiag[::-1], rtol=0.0, atol=tol * scale
        )
        return bool(d_ok and e_ok)


@dataclass(frozen=True)
class WeightVector:
    """Positive first components of normalized eigenvectors, sum of squares 1."""

    w: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.w, dtype=float)).copy()
        if np.any(w <= 0):
            raise DomainError("weights must be strictly positive")
        total = float(np.sum(w * w))
        if abs(total - 1.0) > 1e-10:
            raise DomainError(f"weights must satisfy sum w^2 = 1, got {total}")
        w.flags.writeable = False
        object.__setattr__(self, "w", w)

    def __len__(self):
        return int(self.w.size)


@dataclass(frozen=True)
class SpringMassChain:
    """Fixed-fixed chain: N positive masses, N+1 positive springs."""

    masses: np.ndarray
    springs: np.ndarray
    total_mass: float = field(init=False)

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.masses, dtype=float)).copy()
        k = np.atleast_1d(np.asarray(self.springs, dtype=float)).copy()
        if k.size != m.size + 1:
            raise DomainError(
                f"a chain of {m.size} masses needs {m.size + 1} springs, got {k.size}"
            )
        if np.any(m <= 0) or np.any(k <= 0):
            raise DomainError("masses and springs must be strictly positive")
        m.flags.writeable = False
        k.flags.writeable = False
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "springs", k)
        object.__setattr__(self, "total_mass", float(np.sum(m)))

    @property
    def n(self) -> int:
        return int(self.masses.size)

    def mass_matrix(self) -> np.ndarray:
        return np.diag(self.masses)

    def stiffness_matrix(self) -> np.ndarray:
        k = self.springs
        K = np.diag(k[:-1] + k[1:])
        idx = np.arange(self.n - 1)
        K[idx, idx + 1] = -k[1:-1]
        K[idx + 1, idx] = -k[1:-1]
        return K

    def is_persymmetric(self, tol: float = PERSYMMETRY_TOL) -> bool:
        scale = max(float(np.max(self.masses)), float(np.max(self.springs)), 1.0)
        return bool(
            np.allclose(self.masses, self.masses[::-1], rtol=0.0, atol=tol * scale)
            and np.allclose(self.springs, self.springs[::-1], rtol=0.0, atol=tol * scale)
        )


def eigen_tridiagonal(J: JacobiMatrix, want_vectors: bool = False):
    """Eigenvalues (ascending) and optionally orthonormal eigenvectors."""
    if J.n == 1:
        lam = np.array([J.diag[0]])
        return (Spectrum(lam), np.ones((1, 1))) if want_vectors else Spectrum(lam)
    if want_vectors:
        lam, vecs = eigh_tridiagonal(J.diag, -J.offdiag)
        return Spectrum(lam), vecs
    return Spectrum(eigh_tridiagonal(J.diag, -J.offdiag, eigvals_only=True))


def string_spectrum(N: int, L: float) -> Spectrum:
    """First N squared frequencies (pi k / L)^2 of the fixed-fixed string."""
    if N < 1:
        raise DomainError(f"mode count must be >= 1, got {N}")
    if not (L > 0):
        raise DomainError(f"length must be positive, got {L}")
    k = np.arange(1, N + 1)
    return Spectrum((np.pi * k / L) ** 2)


def equal_mass_chain_spectrum(N: int, L: float) -> Spectrum:
    """Squared frequencies of the uniform N-bead chain with density-1 scaling.

    lam_k = (4 (N+1)^2 / L^2) sin^2(pi k / (2 (N+1))),  k = 1..N;
    each value under-approximates the matching string eigenvalue and
    lam_N / (pi N / L)^2 tends to 4/pi^2 as N grows.
    """
    if N < 1:
        raise DomainError(f"bead count must be >= 1, got {N}")
    if not (L > 0):
        raise DomainError(f"length must be positive, got {L}")
    k = np.arange(1, N + 1)
    return Spectrum(4.0 * (N + 1) ** 2 / L**2 * np.sin(np.pi * k / (2 * (N + 1))) ** 2)


def persymmetric_weights(spec: Spectrum) -> WeightVector:
    """First eigenvector components of the persymmetric Jacobi matrix.

    w_j^2 = c / |prod_{i != j} (lambda_j - lambda_i)| with c fixed by
    normalization; computed in log space to survive wide spectra.
    """
    lam = spec.values
    n = lam.size
    if n == 1:
        return WeightVector(np.array([1.0]))
    gaps = lam[:, None] - lam[None, :]
    np.fill_diagonal(gaps, 1.0)
    if np.min(np.abs(gaps)) == 0.0:
        raise DegenerateSpectrumError("repeated eigenvalues: weights undefined")
    log_w2 = -np.sum(np.log(np.abs(gaps)), axis=1)
    log_w2 -= np.max(log_w2)
    w2 = np.exp(log_w2)
    w2 /= np.sum(w2)
    return WeightVector(np.sqrt(w2))


def lanczos_reconstruct(spec: Spectrum, w: WeightVector) -> JacobiMatrix:
    """Jacobi matrix with the given spectrum and eigenvector first row.

    Runs the Lanczos recursion for the diagonal matrix diag(lambda) seeded
    with the weight vector, with full reorthogonalization.  The resulting
    (diag, offdiag) pair assembles with negative codiagonal; its
    eigenvalues reproduce the input spectrum and the first components of
    its normalized eigenvectors equal w.
    """
    lam = spec.values
    n = lam.size
    if len(w) != n:
        raise DomainError(f"{n} eigenvalues but {len(w)} weights")
    if n == 1:
        return JacobiMatrix(np.array([lam[0]]), np.empty(0))

    scale = float(np.max(lam) - np.min(lam)) or 1.0
    Q = np.zeros((n, n))
    Q[0] = w.w / np.linalg.norm(w.w)
    a = np.zeros(n)
    b = np.zeros(n - 1)
    for i in range(n):
        v = lam * Q[i]
        a[i] = float(Q[i] @ v)
        v -= a[i] * Q[i]
        if i > 0:
            v -= b[i - 1] * Q[i - 1]
        # full reorthogonalization, twice is enough
        for _ in range(2):
            v -= Q[: i + 1].T @ (Q[: i + 1] @ v)
        if i < n - 1:
            norm = float(np.linalg.norm(v))
            if norm <= 1e-13 * scale:
                raise ReconstructionError(
                    f"Lanczos breakdown at step {i + 1}: residual norm {norm:.3e}; "
                    "spectral data is ill-conditioned"
                )
            b[i] = norm
            Q[i + 1] = v / norm
    return JacobiMatrix(a, b)


def chain_to_jacobi(chain: SpringMassChain) -> JacobiMatrix:
    """J = D^{-1} K D^{-1} with D = diag(sqrt(m_i)).

    diag_i = (k_i + k_{i+1}) / m_i,  offdiag_i = k_{i+1} / sqrt(m_i m_{i+1}).
    """
    m, k = chain.masses, chain.springs
    diag = (k[:-1] + k[1:]) / m
    off = k[1:-1] / np.sqrt(m[:-1] * m[1:])
    return JacobiMatrix(diag, off)


def jacobi_to_chain(J: JacobiMatrix, total_mass: float) -> SpringMassChain:
    """Unique persymmetric chain realizing a persymmetric Jacobi matrix.

    The stiffness matrix of any realizing chain satisfies K = D J D with
    D = diag(sqrt(m_i)), and its row sums vanish except at the boundary
    springs: K e = k_1 e_1 + k_{N+1} e_N.  Writing d = D e this becomes
    J d = (k_1 / d_1) e_1 + (k_{N+1} / d_N) e_N, and persymmetry forces the
    two boundary coefficients to coincide.  Solving the tridiagonal system
    J d = e_1 + e_N therefore yields the chain directly:

        m_i = d_i^2,   k_{i+1} = offdiag_i d_i d_{i+1},   k_1 = d_1,
        k_{N+1} = d_N,

    up to one global scale fixed by the requested total mass.  J is a
    positive definite matrix with nonpositive off-diagonal entries (an
    M-matrix), so d is strictly positive and the recovered masses and
    springs are automatically positive.
    """
    if not (total_mass > 0):
        raise DomainError(f"total mass must be positive, got {total_mass}")
    if not J.is_persymmetric():
        raise ReconstructionError(
            "input Jacobi matrix is not persymmetric: the prescribed-total-mass "
            "chain is not unique"
        )
    lo_eig = (eigh_tridiagonal(J.diag, -J.offdiag, eigvals_only=True, select="i",
                               select_range=(0, 0))[0] if J.n > 1 else J.diag[0])
    if lo_eig <= 1e-14 * max(float(np.max(J.diag)), 1.0):
        raise ReconstructionError(
            f"matrix is singular or indefinite (lowest eigenvalue {lo_eig:.3e}); "
            "a fixed-fixed chain needs a positive definite stiffness"
        )

    if J.n == 1:
        half = 0.5 * J.diag[0] * total_mass
        return SpringMassChain(np.array([float(total_mass)]),
                               np.array([half, half]))

    rhs = np.zeros(J.n)
    rhs[0] = 1.0
    rhs[-1] = 1.0
    banded = np.zeros((2, J.n))
    banded[0, 1:] = -J.offdiag
    banded[1, :] = J.diag
    d = solveh_banded(banded, rhs)
    # the exact solution is mirror symmetric; average away solver round-off
    d = 0.5 * (d + d[::-1])
    if np.any(d <= 0):
        raise ReconstructionError(
            "nonpositive entry in the mass recursion; input is not a valid "
            "chain Jacobi matrix"
        )
    masses = d * d
    springs = np.empty(J.n + 1)
    springs[0] = d[0]
    springs[-1] = d[-1]
    springs[1:-1] = J.offdiag * d[:-1] * d[1:]
    scale = total_mass / float(np.sum(masses))
    chain = SpringMassChain(masses * scale, springs * scale)

    back = chain_to_jacobi(chain)
    scale_j = max(float(np.max(np.abs(J.diag))), 1.0)
    if (np.max(np.abs(back.diag - J.diag)) > ROUND_TRIP_TOL * scale_j
            or np.max(np.abs(back.offdiag - J.offdiag)) > ROUND_TRIP_TOL * scale_j):
        raise ReconstructionError("recovered chain fails the Jacobi round trip")
    if not chain.is_persymmetric(tol=1e-9):
        raise ReconstructionError("recovered chain is not persymmetric")
    return chain


def chain_from_spectrum(spec: Spectrum, total_mass: float) -> SpringMassChain:
    """Full inverse pipeline: spectrum -> weights -> Jacobi -> chain."""
    if spec.values[0] <= 0.0:
        raise ReconstructionError(
            "a zero lowest eigenvalue makes the fixed-fixed stiffness singular; "
            "only strictly positive spectra are reconstructible"
        )
    w = persymmetric_weights(spec)
    J = lanczos_reconstruct(spec, w)
    return jacobi_to_chain(J, total_mass)
