"""Time evolution through the switching schedule.

While ``||H(t) - H_inf||`` exceeds ``tail_cutoff`` the Schroedinger equation
is integrated with the exponential midpoint rule

    psi(t + dt) = exp(-i H(t + dt/2) dt) psi(t),

afterwards the state is propagated exactly with the eigendecomposition of
``H_inf``. Step boundaries form a lattice anchored at the start of each
protocol segment, with the requested output times inserted as extra split
points, so results on overlapping intervals are consistent.

Small matrices (``dim <= IntegratorConfig.dense_limit``) are exponentiated
through their eigendecomposition. Larger ones use a truncated Taylor series
for the action of the exponential on the state, with a CSR copy of the
Hamiltonian for the matrix-vector products.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import AbortedRunError, InvalidArgumentError, NumericalError
from .protocols import ProtocolKind, Quench
from .spectral import SpectralDecomposition, diagonalize
from .spin_algebra import is_hermitian

__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "GroundState",
    "ground_state",
    "evolve",
    "schroedinger_propagators",
    "interaction_propagators",
    "interaction_propagator",
    "to_interaction_picture",
]

MAX_STEP_NORM = 0.25
DEFAULT_OUTPUT_POINTS = 2000
TAYLOR_TOL = 1e-16
TAYLOR_MAX_TERMS = 60


@dataclass(frozen=True)
class IntegratorConfig:
    """Step control for the exponential midpoint integrator.

    ``max_step`` is absolute; when it is None the step is
    ``step_scale / max_t ||H(t)||``. Either way the product of step and
    Hamiltonian norm may not exceed 0.25.
    """

    scheme: str = "exponential_midpoint"
    max_step: float | None = None
    step_scale: float = 0.01
    norm_tolerance: float = 1e-9
    tail_cutoff: float = 1e-12
    dense_limit: int = 64

    def __post_init__(self):
        if self.scheme != "exponential_midpoint":
            raise InvalidArgumentError(f"unknown scheme {self.scheme!r}")
        if self.max_step is not None and not self.max_step > 0:
            raise InvalidArgumentError(f"max_step must be > 0, got {self.max_step!r}")
        if not 0 < self.step_scale <= MAX_STEP_NORM:
            raise InvalidArgumentError(f"step_scale must lie in (0, {MAX_STEP_NORM}]")
        if not self.norm_tolerance > 0 or not self.tail_cutoff > 0:
            raise InvalidArgumentError("tolerances must be positive")

    def resolve_step(self, norm_bound: float) -> float:
        if self.max_step is None:
            return self.step_scale / norm_bound if norm_bound > 0 else np.inf
        if self.max_step * norm_bound > MAX_STEP_NORM * (1 + 1e-12):
            raise InvalidArgumentError(
                f"max_step * ||H||_max = {self.max_step * norm_bound:.3g} exceeds {MAX_STEP_NORM}")
        return self.max_step


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States on an output grid; ``psi`` rows are Schroedinger-picture states.

    ``t_switch`` is where numerical integration handed over to exact
    propagation with H_inf, and ``tail_error`` bounds the coefficient error
    made by neglecting the remaining tail of dH(t) there.
    """

    times: np.ndarray
    psi: np.ndarray
    psi_I: np.ndarray | None = None
    t_switch: float = 0.0
    tail_error: float = 0.0
    norm_defect: float = 0.0
    n_steps: int = 0


class GroundState(NamedTuple):
    vector: np.ndarray
    energy: float
    degenerate: bool


def ground_state(h0: np.ndarray, degeneracy_tol: float = 1e-9) -> GroundState:
    """Lowest eigenvector of ``h0``; flags a degenerate ground level."""
    if not is_hermitian(h0):
        raise InvalidArgumentError("ground_state needs a Hermitian matrix")
    try:
        w, v = np.linalg.eigh(h0)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    scale = max(1.0, float(np.abs(w).max()))
    degenerate = len(w) > 1 and (w[1] - w[0]) <= degeneracy_tol * scale
    return GroundState(v[:, 0].astype(np.complex128), float(w[0]), bool(degenerate))


class _MidpointStepper:
    """Applies exp(-i H(t_mid) dt) for H(t) = h_static + lambda(t) dH."""

    def __init__(self, quench: Quench, dense_limit: int):
        self.quench = quench
        self.dense = quench.parts.dim <= dense_limit
        if not self.dense:
            hs, dh = quench.parts.h_static, quench.delta_h
            pattern = sp.csr_matrix((hs != 0) | (dh != 0))
            coo = pattern.tocoo()
            self._hs_data = hs[coo.row, coo.col]
            self._dh_data = dh[coo.row, coo.col]
            self._h = sp.csr_matrix((self._hs_data.copy(), pattern.indices, pattern.indptr),
                                    shape=hs.shape)

    def __call__(self, psi: np.ndarray, t0: float, t1: float) -> np.ndarray:
        dt = t1 - t0
        if dt <= 0:
            return psi
        lam = self.quench.lam(0.5 * (t0 + t1))
        if self.dense:
            w, v = np.linalg.eigh(self.quench.parts.h_static + lam * self.quench.delta_h)
            cols = psi.reshape(len(w), -1)
            return (v @ (np.exp(-1j * w * dt)[:, None] * (v.conj().T @ cols))).reshape(psi.shape)
        self._h.data[:] = self._hs_data + lam * self._dh_data
        return _taylor_action(self._h, psi, dt)


def _taylor_action(h, psi: np.ndarray, dt: float) -> np.ndarray:
    out = psi.astype(np.complex128, copy=True)
    term = out
    scale = np.linalg.norm(psi)
    for k in range(1, TAYLOR_MAX_TERMS):
        term = (-1j * dt / k) * (h @ term)
        out = out + term
        if np.linalg.norm(term) <= TAYLOR_TOL * scale:
            return out
    raise NumericalError("Taylor series for the step exponential did not converge")


def _segment_lattice(a: float, b: float, step: float, lo: float, hi: float) -> np.ndarray:
    """Lattice points of segment [a, b] inside [lo, hi].

    Finite segments are cut into ceil((b - a) / step) equal steps; an open
    segment (b = inf) uses spacing ``step`` from ``a``. Either way the lattice
    does not depend on [lo, hi].
    """
    lo, hi = max(lo, a), min(hi, b)
    if hi < lo:
        return np.empty(0)
    if np.isfinite(b):
        n = max(1, int(np.ceil((b - a) / step - 1e-9))) if np.isfinite(step) else 1
        h = (b - a) / n
    else:
        n, h = None, step
    if not np.isfinite(h):
        return np.array([a])[(a >= lo) & (a <= hi)] if np.isfinite(a) else np.empty(0)
    k = np.arange(int(np.ceil((lo - a) / h - 1e-9)), int(np.floor((hi - a) / h + 1e-9)) + 1)
    if n is not None:
        k = k[(k >= 0) & (k <= n)]
    pts = np.where(k == n, b, a + h * k) if n is not None else a + h * k
    return pts[(pts >= lo) & (pts <= hi)]


def _step_grid(quench: Quench, step: float, t_lo: float, t_hi: float, extra=()) -> np.ndarray:
    p = quench.protocol
    pieces = [np.array([t_lo, t_hi]), np.asarray(extra, dtype=float)]
    if p.kind is not ProtocolKind.SUDDEN:
        pieces.append(_segment_lattice(0.0, p.ramp_end, step, t_lo, t_hi))
    if p.kind is ProtocolKind.LINEAR_THEN_POWERLAW:
        pieces.append(_segment_lattice(p.ramp_end, np.inf, step, t_lo, t_hi))
    grid = np.unique(np.concatenate(pieces))
    return grid[(grid >= t_lo) & (grid <= t_hi)]


def _tail_error(quench: Quench, t_switch: float) -> float:
    if quench.protocol.kind is not ProtocolKind.LINEAR_THEN_POWERLAW:
        return 0.0
    from .dyson_bounds import rhs_convergence_bound
    cert = quench.certificate()
    return rhs_convergence_bound(cert.K, cert.epsilon, t_switch, t_star=cert.t_star)


def _integrate(quench: Quench, state: np.ndarray, t_lo: float, t_hi: float,
               config: IntegratorConfig, checkpoints: np.ndarray):
    """Step from t_lo to t_hi, returning states at the checkpoint times."""
    step = config.resolve_step(quench.norm_bound)
    stepper = _MidpointStepper(quench, config.dense_limit)
    grid = _step_grid(quench, step, t_lo, t_hi, checkpoints)
    out = {}
    wanted = set(np.asarray(checkpoints, dtype=float).tolist())
    if t_lo in wanted:
        out[t_lo] = state
    for t0, t1 in zip(grid[:-1], grid[1:]):
        state = stepper(state, t0, t1)
        if t1 in wanted:
            out[t1] = state
    return state, out, len(grid) - 1


def _final_spectrum(quench, spectral):
    if spectral is None:
        return diagonalize(quench.h_final)
    if spectral.dim != quench.parts.dim:
        raise InvalidArgumentError("spectral decomposition has the wrong dimension")
    return spectral


def evolve(quench: Quench, psi0: np.ndarray, t_end: float,
           config: IntegratorConfig | None = None, times=None,
           spectral: SpectralDecomposition | None = None) -> Trajectory:
    """Evolve ``psi0`` from t = 0 and record it at ``times`` (default 2000 points).

    ``spectral`` may pass a precomputed decomposition of ``quench.h_final``.
    """
    config = config or IntegratorConfig()
    psi0 = np.asarray(psi0, dtype=np.complex128)
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-10:
        raise InvalidArgumentError("initial state must be normalized")
    if not t_end > 0:
        raise InvalidArgumentError(f"t_end must be > 0, got {t_end!r}")
    times = np.linspace(0.0, t_end, DEFAULT_OUTPUT_POINTS) if times is None else np.asarray(times, float)
    if times.ndim != 1 or np.any(np.diff(times) < 0) or times[0] < 0 or times[-1] > t_end:
        raise InvalidArgumentError("output times must be nondecreasing within [0, t_end]")

    t_switch = min(quench.settle_time(config.tail_cutoff), t_end)
    early = times[times <= t_switch]
    state, saved, n_steps = _integrate(quench, psi0, 0.0, t_switch, config, early)
    psi = np.empty((len(times), len(psi0)), dtype=np.complex128)
    n_early = len(early)
    for k, t in enumerate(early):
        psi[k] = saved[t] if t in saved else psi0
    late = times[n_early:]
    if len(late):
        spec = _final_spectrum(quench, spectral)
        c = spec.vectors.conj().T @ state
        phases = np.exp(-1j * np.outer(spec.column_energies, late - t_switch))
        psi[n_early:] = (spec.vectors @ (phases * c[:, None])).T

    norms = np.linalg.norm(psi, axis=1)
    defect = float(max(np.abs(norms - 1.0).max(initial=0.0), abs(np.linalg.norm(state) - 1.0)))
    if defect > config.norm_tolerance:
        raise AbortedRunError(
            f"norm drift {defect:.3e} exceeds {config.norm_tolerance:.1e} "
            f"({n_steps} steps up to t = {t_switch:g})")
    tail_error = _tail_error(quench, t_switch) if t_switch < t_end else 0.0
    return Trajectory(times=times, psi=psi, t_switch=t_switch, tail_error=tail_error,
                      norm_defect=defect, n_steps=n_steps)


def schroedinger_propagators(quench: Quench, times, config: IntegratorConfig | None = None,
                             spectral: SpectralDecomposition | None = None) -> np.ndarray:
    """U(times[k], times[0]) for a nondecreasing list of times, in one pass."""
    config = config or IntegratorConfig()
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0 or np.any(np.diff(times) < 0) or times[0] < 0:
        raise InvalidArgumentError("times must be a nondecreasing list of times >= 0")
    dim = quench.parts.dim
    t0, t_end = times[0], times[-1]
    t_switch = min(max(quench.settle_time(config.tail_cutoff), t0), t_end)
    early = times[times <= t_switch]
    u, saved, _ = _integrate(quench, np.eye(dim, dtype=np.complex128), t0, t_switch, config, early)
    out = np.empty((len(times), dim, dim), dtype=np.complex128)
    for k, t in enumerate(early):
        out[k] = saved[t] if t in saved else np.eye(dim)
    late = times[len(early):]
    if len(late):
        spec = _final_spectrum(quench, spectral)
        for k, t in enumerate(late, start=len(early)):
            out[k] = spec.unitary(t - t_switch) @ u
    defect = max(np.abs(m.conj().T @ m - np.eye(dim)).max() for m in out)
    if defect > config.norm_tolerance:
        raise AbortedRunError(f"propagator unitarity defect {defect:.3e}")
    return out


def interaction_propagators(quench: Quench, times, config: IntegratorConfig | None = None,
                            spectral: SpectralDecomposition | None = None) -> np.ndarray:
    """U_I(times[k], times[0]) = e^{i H_inf t_k} U(t_k, t_0) e^{-i H_inf t_0}."""
    spec = _final_spectrum(quench, spectral)
    times = np.asarray(times, dtype=float)
    u = schroedinger_propagators(quench, times, config, spec)
    right = spec.unitary(times[0])
    return np.stack([spec.unitary(-t) @ m @ right for t, m in zip(times, u)])


def interaction_propagator(quench: Quench, t1: float, t2: float,
                           config: IntegratorConfig | None = None,
                           spectral: SpectralDecomposition | None = None) -> np.ndarray:
    """Interaction-picture propagator U_I(t2, t1) for 0 <= t1 <= t2."""
    if not 0 <= t1 <= t2:
        raise InvalidArgumentError(f"need 0 <= t1 <= t2, got t1={t1!r}, t2={t2!r}")
    return interaction_propagators(quench, [t1, t2], config, spectral)[-1]


def to_interaction_picture(traj: Trajectory, spectral: SpectralDecomposition) -> Trajectory:
    """Fill ``psi_I[k] = exp(+i H_inf t_k) psi[k]``."""
    if traj.psi.shape[1] != spectral.dim:
        raise InvalidArgumentError("trajectory and spectral decomposition differ in dimension")
    c = spectral.vectors.conj().T @ traj.psi.T
    phases = np.exp(1j * np.outer(spectral.column_energies, traj.times))
    psi_I = (spectral.vectors @ (phases * c)).T
    return replace(traj, psi_I=psi_I)
