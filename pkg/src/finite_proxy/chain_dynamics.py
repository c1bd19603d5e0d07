"""Dynamics of reconstructed chains and comparison with the reduced system.

The modal map u = D^{-1} U q (U the orthonormal eigenvectors of
D^{-1} K D^{-1}) diagonalizes the chain's quadratic form; trajectories are
produced by a velocity-form second-order symplectic integrator so that
conservative runs hold their energy over long horizons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .inverse_spectral import SpringMassChain, chain_to_jacobi, eigen_tridiagonal
from .nonlinearity import Nonlinearity
from .reduction import ReductionResult, mu_time_profiles


@dataclass(frozen=True)
class ModalMap:
    """Modal-to-displacement map and the chain's squared frequencies."""

    matrix: np.ndarray        # Upsilon, columns are M-orthonormal mode shapes
    frequencies_sq: np.ndarray

    def to_modal(self, chain: SpringMassChain, u: np.ndarray) -> np.ndarray:
        """q = Upsilon^T M u (valid because Upsilon^T M Upsilon = I)."""
        return self.matrix.T @ (chain.masses * np.asarray(u, dtype=float))

    def to_displacement(self, q: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(q, dtype=float)


def build_modal_map(chain: SpringMassChain) -> ModalMap:
    """Eigen decomposition of D^{-1} K D^{-1} lifted back to displacements.

    Columns carry the sign convention that their first nonzero component is
    positive, for reproducible exports.
    """
    J = chain_to_jacobi(chain)
    spec, vecs = eigen_tridiagonal(J, want_vectors=True)
    upsilon = vecs / np.sqrt(chain.masses)[:, None]
    for col in range(upsilon.shape[1]):
        nz = np.nonzero(np.abs(upsilon[:, col]) > 1e-13)[0]
        if nz.size and upsilon[nz[0], col] < 0:
            upsilon[:, col] = -upsilon[:, col]
    return ModalMap(matrix=upsilon, frequencies_sq=spec.values.copy())


@dataclass(frozen=True)
class ChainState:
    positions: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        u = np.atleast_1d(np.asarray(self.positions, dtype=float)).copy()
        v = np.atleast_1d(np.asarray(self.velocities, dtype=float)).copy()
        if u.shape != v.shape:
            raise DomainError("positions and velocities must have matching shapes")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise DomainError("chain state entries must be finite")
        u.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "positions", u)
        object.__setattr__(self, "velocities", v)


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    positions: np.ndarray   # (n_samples, N)
    velocities: np.ndarray  # (n_samples, N)
    energies: np.ndarray
    modal: np.ndarray       # (n_samples, N) modal coordinates per sample

    def final_state(self) -> ChainState:
        return ChainState(self.positions[-1], self.velocities[-1])


def total_energy(chain: SpringMassChain, state: ChainState,
                 nonlinearity: Nonlinearity | None = None) -> float:
    """Kinetic + elastic energy, minus the primitive of the bead forcing."""
    u, v = state.positions, state.velocities
    K = chain.stiffness_matrix()
    energy = 0.5 * float(v @ (chain.masses * v)) + 0.5 * float(u @ (K @ u))
    if nonlinearity is not None and not nonlinearity.is_zero:
        energy -= float(np.sum(nonlinearity.G(u)))
    return energy


def simulate_chain(chain: SpringMassChain, nonlinearity: Nonlinearity,
                   initial: ChainState, dt: float, steps: int,
                   sample_stride: int = 1) -> TrajectoryRecord:
    """Velocity-Verlet integration of M u'' + K u = f(u) (f per bead).

    Requires dt * max modal frequency <= 0.5 so the scheme stays in its
    stable regime; each sampled row carries the instantaneous energy and
    modal coordinates.
    """
    if steps < 1:
        raise DomainError(f"step count must be >= 1, got {steps}")
    if sample_stride < 1:
        raise DomainError(f"sample stride must be >= 1, got {sample_stride}")
    if initial.positions.size != chain.n:
        raise DomainError(
            f"state has {initial.positions.size} beads, chain has {chain.n}"
        )
    mapping = build_modal_map(chain)
    omega_max = math.sqrt(float(np.max(mapping.frequencies_sq)))
    if dt * omega_max > 0.5:
        raise DomainError(
            f"dt={dt} too large for max frequency {omega_max:.4g} "
            f"(need dt * omega <= 0.5, got {dt * omega_max:.4g})"
        )

    K = chain.stiffness_matrix()
    inv_m = 1.0 / chain.masses
    use_nl = not nonlinearity.is_zero

    def accel(u):
        force = -K @ u
        if use_nl:
            force = force + nonlinearity(u)
        return inv_m * force

    n_samples = steps // sample_stride + 1
    times = np.empty(n_samples)
    positions = np.empty((n_samples, chain.n))
    velocities = np.empty((n_samples, chain.n))
    energies = np.empty(n_samples)
    modal = np.empty((n_samples, chain.n))

    u = initial.positions.copy()
    v = initial.velocities.copy()
    a = accel(u)

    def record(row, step):
        times[row] = step * dt
        positions[row] = u
        velocities[row] = v
        energies[row] = total_energy(chain, ChainState(u, v), nonlinearity)
        modal[row] = mapping.to_modal(chain, u)

    record(0, 0)
    row = 1
    for step in range(1, steps + 1):
        v_half = v + 0.5 * dt * a
        u = u + dt * v_half
        a = accel(u)
        v = v_half + 0.5 * dt * a
        if step % sample_stride == 0:
            record(row, step)
            row += 1
    return TrajectoryRecord(times, positions, velocities, energies, modal)


@dataclass
class ModalComparison:
    """Per-mode agreement between the chain and the reduced oscillator core."""

    mode_index: np.ndarray
    chain_frequencies_sq: np.ndarray
    reduced_frequencies_sq: np.ndarray
    abs_err: np.ndarray
    rel_err: np.ndarray
    trajectory_times: np.ndarray | None = None
    trajectory_discrepancy: np.ndarray | None = None  # per mode, sup over time
    notes: list[str] = field(default_factory=list)

    @property
    def max_frequency_error(self) -> float:
        return float(np.max(self.abs_err)) if self.abs_err.size else 0.0


def modal_compare(chain: SpringMassChain, reduced: ReductionResult,
                  mapping: ModalMap, dt: float = 1e-3) -> ModalComparison:
    """Compare chain modal frequencies with the reduced harmonic coefficients.

    The reduced core contributes one squared frequency per positive spatial
    index (the zero-frequency channel of the wave core has no chain
    counterpart).  For wave results the solved mu_k(t) profiles of the
    sine channels are injected as modal initial data into a conservative
    chain run and the modal trajectories are compared; with a nonzero
    coupling the discrepancy is reported, not asserted small.
    """
    problem = reduced.problem
    R = problem.cutoff
    if chain.n != R:
        raise DomainError(
            f"chain has {chain.n} beads but the reduced core has {R} "
            "positive spatial modes"
        )
    ks = np.arange(1, R + 1)
    if problem.kind == "static":
        reduced_freq = (np.pi * ks / problem.geometry.L) ** 2
    else:
        reduced_freq = (2.0 * np.pi * ks / problem.geometry.L) ** 2
    chain_freq = mapping.frequencies_sq
    abs_err = np.abs(chain_freq - reduced_freq)
    rel_err = abs_err / np.abs(reduced_freq)
    comparison = ModalComparison(
        mode_index=ks,
        chain_frequencies_sq=chain_freq.copy(),
        reduced_frequencies_sq=reduced_freq,
        abs_err=abs_err,
        rel_err=rel_err,
    )
    if problem.kind == "static":
        comparison.notes.append("static reduction: frequency table only")
        return comparison

    # trajectory leg: inject mu_k(0), mudot_k(0) of the sine channels
    labels, _, _ = mu_time_profiles(problem, reduced.mu, [0.0])
    basis = problem.basis
    sine_cols = [i for i, lab in enumerate(labels) if lab.endswith("s")]
    if len(sine_cols) != R:
        comparison.notes.append("no sine-channel profiles; trajectory leg skipped")
        return comparison

    T = problem.geometry.require_period()
    n_steps = max(1, int(round(T / dt)))
    t_grid = dt * np.arange(n_steps + 1)
    t_grid[-1] = min(t_grid[-1], T)
    _, _, profiles = mu_time_profiles(problem, reduced.mu, t_grid)
    prof = profiles[sine_cols, :]

    # initial modal data: mu(0) = 0 by construction, mudot(0) from the series
    core_ch = [s for s in range(basis.n_spatial)
               if basis.k_of_channel[s] <= R and basis.trig_of_channel[s] == 1]
    q0 = np.zeros(R)
    qdot0 = np.array([float(reduced.mu.coeffs[:, s] @ basis.nu) for s in core_ch])
    u0 = mapping.to_displacement(q0)
    v0 = mapping.to_displacement(qdot0)
    from .nonlinearity import zero as zero_nl

    record = simulate_chain(chain, zero_nl(), ChainState(u0, v0),
                            dt=dt, steps=n_steps)
    discrepancy = np.max(np.abs(record.modal[: prof.shape[1]].T - prof[:, : record.modal.shape[0]]),
                         axis=1)
    comparison.trajectory_times = record.times
    comparison.trajectory_discrepancy = discrepancy
    if not problem.nonlinearity.is_zero:
        comparison.notes.append(
            "nonzero coupling: trajectory discrepancy is reported, not asserted"
        )
    return comparison
