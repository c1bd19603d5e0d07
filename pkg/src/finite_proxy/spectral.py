"""Eigenstructure of the 1D Laplacian and d'Alembertian on truncated mode sets.

Two discretizations live here:

* static case: Dirichlet interval [0, L], basis
      u_k(x) = sqrt(L/2) * (1/(pi k)) * sin(pi k x / L),   k = 1..k_max,
  eigenvalues lam_k = (pi k / L)^2 of -d^2/dx^2.

* wave case: space-time cylinder [0, T] x (torus of circumference L),
  time factors sin(j pi t / T) (zero at t = 0, T), spatial channels
  {1, sqrt(2) cos(w_k x), sqrt(2) sin(w_k x)} with w_k = 2 pi k / L,
  normalized so the averaged L^2 norm of each channel is 1.
  The wave operator d^2/dt^2 - d^2/dx^2 acts diagonally with symbol
      sigma(j, k) = w_k^2 - (j pi / T)^2.

All norms are averaged over the domain: the squared H-norm of a field is
(1/L) int (u^2 + u_x^2) dx in the static case and
(1/(L T)) int (u^2 + u_t^2 + u_x^2) dx dt in the wave case, and both equal
a weighted sum of squared coefficients (Parseval weights precomputed per
mode).  Fields are immutable values; every operation returns fresh arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dst, idst, rfft, irfft

from .errors import CapacityError, DomainError, NonresonanceError, ResolutionError

DEFAULT_SIGMA_MIN = 1e-6


@dataclass(frozen=True)
class Geometry:
    """Interval length L and, for wave problems, the time horizon T."""

    L: float
    T: float | None = None

    def __post_init__(self):
        if not (self.L > 0):
            raise DomainError(f"spatial length must be positive, got L={self.L}")
        if self.T is not None and not (self.T > 0):
            raise DomainError(f"time horizon must be positive, got T={self.T}")

    def require_period(self) -> float:
        if self.T is None:
            raise DomainError("this operation needs a time horizon T")
        return self.T


@dataclass(frozen=True)
class ModeSet:
    """Retained mode indices plus the core/tail cutoff R.

    Spatial indices run 1..k_max in the static case and 0..k_max in the
    wave case (each k >= 1 carrying a cosine and a sine channel);
    j_max counts the temporal sine modes of the wave case.
    Core = spatial index <= cutoff, tail = the rest of the retained set.
    """

    k_max: int
    cutoff: int
    j_max: int | None = None

    def __post_init__(self):
        if self.k_max < 1:
            raise DomainError(f"k_max must be >= 1, got {self.k_max}")
        if not (0 <= self.cutoff <= self.k_max):
            raise CapacityError(
                f"cutoff R={self.cutoff} outside the working mode set (k_max={self.k_max})"
            )
        if self.j_max is not None and self.j_max < 1:
            raise DomainError(f"j_max must be >= 1, got {self.j_max}")

    @property
    def is_wave(self) -> bool:
        return self.j_max is not None


def string_eigenpair(k: int, L: float):
    """Eigenvalue and mode shape of -d^2/dx^2 on (0, L) with fixed ends.

    Returns (lam_k, u_k) with lam_k = (pi k / L)^2 and u_k a vectorized
    callable, u_k(x) = sqrt(L/2) (1/(pi k)) sin(pi k x / L).
    """
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise DomainError(f"mode index must be a positive integer, got {k}")
    if not (L > 0):
        raise DomainError(f"length must be positive, got {L}")
    lam = (math.pi * k / L) ** 2
    amp = math.sqrt(L / 2.0) / (math.pi * k)

    def shape(x):
        return amp * np.sin(math.pi * k * np.asarray(x, dtype=float) / L)

    return lam, shape


def dalembert_symbol(j: int, k: int, geometry: Geometry,
                     sigma_min: float = DEFAULT_SIGMA_MIN) -> float:
    """Symbol of d^2/dt^2 - d^2/dx^2 on the (j, k) product mode.

    sigma = w_k^2 - (j pi / T)^2 with w_k = 2 pi k / L the torus
    eigenfrequency.  Values inside the nonresonance floor are rejected.
    """
    if j < 1:
        raise DomainError(f"temporal index must be >= 1, got {j}")
    if k < 0:
        raise DomainError(f"spatial index must be >= 0, got {k}")
    T = geometry.require_period()
    omega = 2.0 * math.pi * k / geometry.L
    sigma = omega * omega - (j * math.pi / T) ** 2
    if abs(sigma) < sigma_min:
        raise NonresonanceError(
            f"resonant mode (j={j}, k={k}): |sigma|={abs(sigma):.3e} < {sigma_min:.1e}",
            offending=[(j, k)],
            suggested_period=_perturb_period(T),
        )
    return sigma


def _perturb_period(T: float) -> float:
    # nudge T off the resonance by an irrational-ish relative shift
    return T * (1.0 + 1e-3 * math.sqrt(2.0))


class SineBasis:
    """Dirichlet sine basis on [0, L], modes k = 1..k_max."""

    kind = "static"

    def __init__(self, geometry: Geometry, modes: ModeSet):
        if modes.is_wave:
            raise DomainError("SineBasis expects a static ModeSet (no j_max)")
        self.geometry = geometry
        self.modes = modes
        k = np.arange(1, modes.k_max + 1)
        self.k = k
        self.lam = (np.pi * k / geometry.L) ** 2
        self.amp = np.sqrt(geometry.L / 2.0) / (np.pi * k)
        # averaged Parseval weights: (1/L) int u_k^2 and (1/L) int (u_k')^2
        self.weight_value = self.amp**2 / 2.0
        self.weight_grad = self.amp**2 * self.lam / 2.0
        self.weight_h = self.weight_value + self.weight_grad
        self.size = modes.k_max
        self.shape = (modes.k_max,)
        self.spatial_index = k

    def core_mask(self, cutoff: int | None = None) -> np.ndarray:
        R = self.modes.cutoff if cutoff is None else cutoff
        return self.spatial_index <= R

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def default_resolution(self) -> int:
        """Subinterval count of the canonical transform grid (>= 4 k_max)."""
        return max(64, _next_pow2(4 * self.modes.k_max))

    def check_resolution(self, n_sub: int):
        if n_sub < 4 * self.modes.k_max:
            raise ResolutionError(
                f"grid with {n_sub} subintervals under-resolves k_max={self.modes.k_max}"
                f" (need >= {4 * self.modes.k_max} for the anti-aliasing guard)"
            )

    def canonical_grid(self, n_sub: int) -> np.ndarray:
        """Interior points i L / n_sub, i = 1..n_sub-1."""
        return self.geometry.L * np.arange(1, n_sub) / n_sub

    def transform(self, values: np.ndarray, n_sub: int) -> np.ndarray:
        """Coefficients (in the u_k basis) of samples on the canonical grid."""
        sine_coeffs = dst(np.asarray(values, dtype=float), type=1) / n_sub
        return sine_coeffs[: self.modes.k_max] / self.amp

    def synthesize_canonical(self, coeffs: np.ndarray, n_sub: int) -> np.ndarray:
        sine_coeffs = np.zeros(n_sub - 1)
        sine_coeffs[: self.modes.k_max] = coeffs * self.amp
        return idst(sine_coeffs * n_sub, type=1)

    def evaluate(self, coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        phase = np.pi * np.outer(x, self.k) / self.geometry.L
        return np.sin(phase) @ (coeffs * self.amp)

    def evaluate_dx(self, coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        freq = np.pi * self.k / self.geometry.L
        phase = np.outer(x, freq)
        return np.cos(phase) @ (coeffs * self.amp * freq)


class WaveBasis:
    """Tensor basis sin(j pi t / T) x torus channels on [0,T] x [0,L).

    Spatial channels are ordered [const, (1,cos), (1,sin), ..., (k_max,cos),
    (k_max,sin)]; coefficient arrays have shape (j_max, 2 k_max + 1).
    """

    kind = "wave"

    def __init__(self, geometry: Geometry, modes: ModeSet,
                 sigma_min: float = DEFAULT_SIGMA_MIN):
        if not modes.is_wave:
            raise DomainError("WaveBasis expects a wave ModeSet (j_max set)")
        T = geometry.require_period()
        self.geometry = geometry
        self.modes = modes
        self.sigma_min = sigma_min
        K, J = modes.k_max, modes.j_max
        self.n_spatial = 2 * K + 1
        self.shape = (J, self.n_spatial)
        self.size = J * self.n_spatial

        k_of_channel = np.zeros(self.n_spatial, dtype=int)
        trig_of_channel = np.zeros(self.n_spatial, dtype=int)  # 0 = cos, 1 = sin
        for k in range(1, K + 1):
            k_of_channel[2 * k - 1] = k
            k_of_channel[2 * k] = k
            trig_of_channel[2 * k] = 1
        self.k_of_channel = k_of_channel
        self.trig_of_channel = trig_of_channel
        self.omega = 2.0 * np.pi * k_of_channel / geometry.L

        j = np.arange(1, J + 1)
        self.j = j
        self.nu = j * np.pi / T  # temporal frequencies

        # symbol table sigma[j-1, channel] = omega^2 - (j pi / T)^2
        self.sigma = self.omega[None, :] ** 2 - self.nu[:, None] ** 2
        bad = np.argwhere(np.abs(self.sigma) < sigma_min)
        if bad.size:
            offending = [(int(j[r]), int(k_of_channel[c])) for r, c in bad]
            raise NonresonanceError(
                f"geometry T={T} is resonant on modes {sorted(set(offending))}: "
                f"|sigma| < {sigma_min:.1e}; try T={_perturb_period(T):.12g}",
                offending=sorted(set(offending)),
                suggested_period=_perturb_period(T),
            )

        # Parseval weights per mode (averaged measure): value 1/2,
        # time-derivative nu^2/2, space-derivative omega^2/2.
        self.weight_value = np.full(self.shape, 0.5)
        self.weight_dt = 0.5 * np.broadcast_to(self.nu[:, None] ** 2, self.shape).copy()
        self.weight_dx = 0.5 * np.broadcast_to(self.omega[None, :] ** 2, self.shape).copy()
        self.weight_h = self.weight_value + self.weight_dt + self.weight_dx
        self.spatial_index = np.broadcast_to(k_of_channel[None, :], self.shape).copy()

    def core_mask(self, cutoff: int | None = None) -> np.ndarray:
        R = self.modes.cutoff if cutoff is None else cutoff
        return self.spatial_index <= R

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def default_resolution(self) -> tuple[int, int]:
        n_t = max(16, _next_pow2(4 * self.modes.j_max))
        n_x = max(16, _next_pow2(4 * self.modes.k_max))
        return n_t, n_x

    def check_resolution(self, resolution: tuple[int, int]):
        n_t, n_x = resolution
        if n_t < 4 * self.modes.j_max or n_x < 4 * self.modes.k_max:
            raise ResolutionError(
                f"grid ({n_t}, {n_x}) under-resolves (j_max, k_max)="
                f"({self.modes.j_max}, {self.modes.k_max}); need >= 4x each"
            )

    def canonical_grid(self, resolution: tuple[int, int]):
        n_t, n_x = resolution
        T = self.geometry.require_period()
        t = T * np.arange(1, n_t) / n_t
        x = self.geometry.L * np.arange(n_x) / n_x
        return t, x

    def transform(self, values: np.ndarray, resolution: tuple[int, int]) -> np.ndarray:
        """Coefficients from samples of shape (n_t - 1, n_x) on the canonical grid."""
        n_t, n_x = resolution
        time_coeffs = dst(np.asarray(values, dtype=float), type=1, axis=0) / n_t
        spec = rfft(time_coeffs, axis=1)
        K, J = self.modes.k_max, self.modes.j_max
        out = np.zeros(self.shape)
        out[:, 0] = spec[:J, 0].real / n_x
        ks = np.arange(1, K + 1)
        out[:, 2 * ks - 1] = math.sqrt(2.0) * spec[:J, ks].real / n_x
        out[:, 2 * ks] = -math.sqrt(2.0) * spec[:J, ks].imag / n_x
        return out

    def synthesize_canonical(self, coeffs: np.ndarray, resolution: tuple[int, int]) -> np.ndarray:
        n_t, n_x = resolution
        K, J = self.modes.k_max, self.modes.j_max
        spec = np.zeros((n_t - 1, n_x // 2 + 1), dtype=complex)
        spec[:J, 0] = coeffs[:, 0] * n_x
        ks = np.arange(1, K + 1)
        spec[:J, ks] = (coeffs[:, 2 * ks - 1] - 1j * coeffs[:, 2 * ks]) * (n_x / math.sqrt(2.0))
        time_coeffs = irfft(spec, n=n_x, axis=1)
        return idst(time_coeffs * n_t, type=1, axis=0)

    def _spatial_table(self, x: np.ndarray) -> np.ndarray:
        """Channel functions evaluated at x, shape (len(x), n_spatial)."""
        x = np.asarray(x, dtype=float)
        table = np.empty((x.size, self.n_spatial))
        table[:, 0] = 1.0
        for k in range(1, self.modes.k_max + 1):
            w = 2.0 * math.pi * k / self.geometry.L
            table[:, 2 * k - 1] = math.sqrt(2.0) * np.cos(w * x)
            table[:, 2 * k] = math.sqrt(2.0) * np.sin(w * x)
        return table

    def evaluate(self, coeffs: np.ndarray, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Pointwise values at paired (t_i, x_i) samples."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        time_table = np.sin(np.outer(t, self.nu))          # (n, J)
        spatial_table = self._spatial_table(x)             # (n, S)
        return np.einsum("nj,js,ns->n", time_table, coeffs, spatial_table)

    def evaluate_dt(self, coeffs, t, x):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        time_table = np.cos(np.outer(t, self.nu)) * self.nu[None, :]
        spatial_table = self._spatial_table(x)
        return np.einsum("nj,js,ns->n", time_table, coeffs, spatial_table)

    def evaluate_dx(self, coeffs, t, x):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        time_table = np.sin(np.outer(t, self.nu))
        dx_table = np.zeros((x.size, self.n_spatial))
        for k in range(1, self.modes.k_max + 1):
            w = 2.0 * math.pi * k / self.geometry.L
            dx_table[:, 2 * k - 1] = -math.sqrt(2.0) * w * np.sin(w * x)
            dx_table[:, 2 * k] = math.sqrt(2.0) * w * np.cos(w * x)
        return np.einsum("nj,js,ns->n", time_table, coeffs, dx_table)


@dataclass(frozen=True)
class SpaceTimeField:
    """Immutable table of spectral coefficients over a basis."""

    basis: SineBasis | WaveBasis
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.coeffs, dtype=float)
        if arr.shape != self.basis.shape:
            raise DomainError(
                f"coefficient shape {arr.shape} does not match basis {self.basis.shape}"
            )
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "coeffs", arr)

    @classmethod
    def zero(cls, basis) -> "SpaceTimeField":
        return cls(basis, basis.zeros())

    def with_coeffs(self, coeffs: np.ndarray) -> "SpaceTimeField":
        return SpaceTimeField(self.basis, coeffs)

    def __add__(self, other: "SpaceTimeField") -> "SpaceTimeField":
        self._check_compatible(other)
        return SpaceTimeField(self.basis, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpaceTimeField") -> "SpaceTimeField":
        self._check_compatible(other)
        return SpaceTimeField(self.basis, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpaceTimeField":
        return SpaceTimeField(self.basis, self.coeffs * scalar)

    __rmul__ = __mul__

    def _check_compatible(self, other: "SpaceTimeField"):
        if other.basis is not self.basis and other.basis.shape != self.basis.shape:
            raise DomainError("fields live on incompatible bases")

    def h_norm(self) -> float:
        """Parseval H-norm: sqrt(sum of weight_h * coeff^2)."""
        return math.sqrt(float(np.sum(self.basis.weight_h * self.coeffs**2)))

    def h_inner(self, other: "SpaceTimeField") -> float:
        self._check_compatible(other)
        return float(np.sum(self.basis.weight_h * self.coeffs * other.coeffs))


@dataclass(frozen=True)
class OperatorSymbol:
    """Diagonal symbol of the Laplacian or d'Alembertian on a basis."""

    kind: str  # "laplacian" | "dalembertian"
    basis: SineBasis | WaveBasis
    values: np.ndarray = field(repr=False)

    @classmethod
    def laplacian(cls, basis: SineBasis) -> "OperatorSymbol":
        if basis.kind != "static":
            raise DomainError("laplacian symbol lives on a static sine basis")
        return cls("laplacian", basis, basis.lam.copy())

    @classmethod
    def dalembertian(cls, basis: WaveBasis) -> "OperatorSymbol":
        if basis.kind != "wave":
            raise DomainError("dalembertian symbol lives on a wave basis")
        return cls("dalembertian", basis, basis.sigma.copy())

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def spatial_tail_floor(self, cutoff: int) -> float:
        """Smallest |symbol| over modes with spatial index > cutoff."""
        tail = ~self.basis.core_mask(cutoff)
        if not np.any(tail):
            return math.inf
        return float(np.min(np.abs(self.values[tail])))


def apply_inverse_operator(field: SpaceTimeField, symbol: OperatorSymbol) -> SpaceTimeField:
    """Divide each coefficient by its symbol value (the inverse operator g)."""
    if symbol.basis is not field.basis and symbol.basis.shape != field.basis.shape:
        raise DomainError("symbol and field live on different bases")
    if np.any(symbol.values == 0.0):
        raise NonresonanceError("zero symbol value on a retained mode")
    return field.with_coeffs(field.coeffs / symbol.values)


def apply_forward_operator(field: SpaceTimeField, symbol: OperatorSymbol) -> SpaceTimeField:
    return field.with_coeffs(field.coeffs * symbol.values)


def split_field(fld: SpaceTimeField, modes: ModeSet):
    """Split into (core, tail) by spatial index <= modes.cutoff.

    The two parts sum to the input exactly and are H-orthogonal
    (disjoint mode supports).
    """
    if modes.k_max != fld.basis.modes.k_max or modes.j_max != fld.basis.modes.j_max:
        raise DomainError("mode set does not match the field's basis")
    mask = fld.basis.core_mask(modes.cutoff)
    core = np.where(mask, fld.coeffs, 0.0)
    tail = np.where(mask, 0.0, fld.coeffs)
    return fld.with_coeffs(core), fld.with_coeffs(tail)


def select_cutoff(C: float, symbol: OperatorSymbol, margin: float) -> int:
    """Smallest R with C / (smallest tail |symbol|) <= margin.

    Mode ordering is by spatial index; the returned R guarantees the tail
    contraction ratio is at most `margin`.
    """
    if C < 0:
        raise DomainError(f"Lipschitz constant must be >= 0, got {C}")
    if not (0 < margin <= 1):
        raise DomainError(f"margin must lie in (0, 1], got {margin}")
    k_max = symbol.basis.modes.k_max
    for R in range(0, k_max):
        floor = symbol.spatial_tail_floor(R)
        if C <= margin * floor:
            return R
    raise CapacityError(
        f"no cutoff R < k_max={k_max} achieves contraction margin {margin} "
        f"for Lipschitz constant {C}; enlarge the working mode set"
    )


def synthesize(fld: SpaceTimeField, grid):
    """Pointwise values of the field on a grid, plus its Parseval H-norm.

    Static fields take an array of x points in [0, L]; wave fields take an
    (n, 2) array of (t, x) points in [0, T] x [0, L].
    """
    basis = fld.basis
    if basis.kind == "static":
        x = np.atleast_1d(np.asarray(grid, dtype=float))
        if np.any(x < 0) or np.any(x > basis.geometry.L):
            raise DomainError("grid point outside [0, L]")
        values = basis.evaluate(fld.coeffs, x)
    else:
        pts = np.atleast_2d(np.asarray(grid, dtype=float))
        if pts.shape[1] != 2:
            raise DomainError("wave grid must be an (n, 2) array of (t, x) points")
        t, x = pts[:, 0], pts[:, 1]
        T = basis.geometry.require_period()
        if np.any(t < 0) or np.any(t > T):
            raise DomainError("grid point outside [0, T]")
        if np.any(x < 0) or np.any(x > basis.geometry.L):
            raise DomainError("grid point outside [0, L]")
        values = basis.evaluate(fld.coeffs, t, x)
    return values, fld.h_norm()


def _next_pow2(n: int) -> int:
    return 1 << max(0, (int(n) - 1)).bit_length()
