"""Average state, effective dimension and time-averaged fluctuations.

Once dH(t) has died out the interaction-picture state is frozen at
``psi_I(inf) = sum_n c_n |E_n>``. With degenerate blocks rotated so that the
state overlaps one vector per level, the infinite-time average state is

    rho_bar = sum_n |c_n|**2 |E_n><E_n|,     d_eff = 1 / tr(rho_bar**2),

and the time-averaged fluctuation of an observable A obeys

    sum_{n != m} |c_n* A_nm c_m|**2 <= tr(A rho A rho) <= tr(A**2 rho**2)
                                   <= ||A||**2 / d_eff.

The first expression is the exact fluctuation when no two level pairs share
an energy gap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import InvalidArgumentError, InvalidStateError
from .spectral import (GapReport, SpectralDecomposition, coefficients,
                       level_populations, rotate_degenerate_blocks)
from .spin_algebra import is_hermitian, operator_norm

__all__ = [
    "AverageState",
    "WindowedAverage",
    "FluctuationChain",
    "EquilibrationReport",
    "average_state_from_limit",
    "average_state_empirical",
    "effective_dimension",
    "quench_effective_dimension",
    "window_average",
    "running_average",
    "octave_discrepancy",
    "expectation_series",
    "expectation_from_coefficients",
    "time_average_expectation",
    "fluctuation_empirical",
    "fluctuation_closed_form",
    "fluctuation_chain",
    "theorem_bound",
    "check",
]

NORM_TOL = 1e-9
SUPPORT_TOL = 1e-10
BOUND_RTOL = 1e-12
CONVERGENCE_TOL = 1e-2


@dataclass(frozen=True, eq=False)
class AverageState:
    """Time-averaged interaction-picture density matrix."""

    rho: np.ndarray
    construction: str
    window: tuple[float, float] | None = None
    converged: bool = True
    convergence_diag: float = 0.0

    @property
    def purity(self) -> float:
        return float(np.sum(np.abs(self.rho) ** 2))

    @property
    def d_eff(self) -> float:
        return 1.0 / self.purity


@dataclass(frozen=True)
class WindowedAverage:
    """Trapezoidal window average, with the same average over the first half.

    ``relative_change`` compares both; ``reference`` is the infinite-time
    value it should approach, when one was supplied.
    """

    value: float
    half_value: float
    window: tuple[float, float]
    tol: float = CONVERGENCE_TOL
    reference: float | None = None

    @property
    def relative_change(self) -> float:
        return abs(self.value - self.half_value) / max(abs(self.value), 1e-300)

    @property
    def converged(self) -> bool:
        return self.relative_change <= self.tol or abs(self.value - self.half_value) <= 1e-14

    @property
    def distance(self) -> float | None:
        return None if self.reference is None else abs(self.value - self.reference)

    def __float__(self) -> float:
        return float(self.value)


@dataclass(frozen=True)
class FluctuationChain:
    """Intermediate quantities of the fluctuation bound, in decreasing order of tightness."""

    closed: float
    tr_a_rho_a_rho: float
    tr_a2_rho2: float
    bound: float

    @property
    def values(self) -> tuple[float, float, float, float]:
        return (self.closed, self.tr_a_rho_a_rho, self.tr_a2_rho2, self.bound)

    def monotone(self, rtol: float = BOUND_RTOL) -> bool:
        v = self.values
        return all(a <= b * (1 + rtol) + 1e-14 for a, b in zip(v[:-1], v[1:]))


@dataclass
class EquilibrationReport:
    d_eff: float
    fluct_empirical: float
    fluct_closed: float
    bound: float
    bound_satisfied: bool
    gap_report: GapReport | None
    a_norm: float
    convergence_diag: float
    extras: dict = field(default_factory=dict)

    @property
    def gap_nondegenerate(self) -> bool | None:
        return None if self.gap_report is None else self.gap_report.non_degenerate

    def to_dict(self) -> dict:
        out = {
            "d_eff": self.d_eff,
            "fluct_empirical": self.fluct_empirical,
            "fluct_closed": self.fluct_closed,
            "bound": self.bound,
            "bound_satisfied": self.bound_satisfied,
            "gap_nondegenerate": self.gap_nondegenerate,
            "gap_report": None if self.gap_report is None else self.gap_report.to_dict(),
            "a_norm": self.a_norm,
            "convergence_diag": self.convergence_diag,
        }
        out.update(self.extras)
        return out


def _check_state(c, name="coefficients"):
    total = float(np.sum(np.abs(c) ** 2))
    if abs(total - 1.0) > NORM_TOL:
        raise InvalidArgumentError(f"{name} are not normalized (sum |c|^2 = {total!r})")


def _lead_weights(c, spec: SpectralDecomposition):
    """|c|**2 on the first vector of each level, refusing support elsewhere."""
    c = np.asarray(c)
    mask = np.ones(spec.dim, dtype=bool)
    mask[spec.lead_indices] = False
    stray = np.abs(c[mask]).max(initial=0.0)
    if stray > SUPPORT_TOL:
        raise InvalidStateError(
            f"state overlaps several vectors of a degenerate level (|c| = {stray:.2e}); "
            "rotate the blocks against the state first")
    return np.abs(c[spec.lead_indices]) ** 2


def average_state_from_limit(c_inf: np.ndarray, spec: SpectralDecomposition) -> AverageState:
    """rho_bar = sum_n |c_n|**2 |E_n><E_n| for a spectrum rotated against the state."""
    c_inf = np.asarray(c_inf)
    if c_inf.shape != (spec.dim,):
        raise InvalidArgumentError(f"coefficient array has shape {c_inf.shape}, expected ({spec.dim},)")
    _check_state(c_inf)
    p = _lead_weights(c_inf, spec)
    lead = spec.lead_vectors
    rho = (lead * p) @ lead.conj().T
    return AverageState(rho, "limit_coefficients")


def _trapezoid_weights(times: np.ndarray, window) -> np.ndarray:
    """Weights w with sum_k w_k f(t_k) the trapezoidal window average of f."""
    lo, hi = window
    if not hi > lo:
        raise InvalidArgumentError(f"empty window {window}")
    slack = 1e-12 * max(1.0, abs(times[-1]))
    if lo < times[0] - slack or hi > times[-1] + slack:
        raise InvalidArgumentError(f"window {window} is not covered by [{times[0]}, {times[-1]}]")
    idx = np.flatnonzero((times >= lo - slack) & (times <= hi + slack))
    if len(idx) < 2:
        raise InvalidArgumentError("window contains fewer than two samples")
    t = times[idx]
    dt = np.diff(t)
    w = np.zeros(len(times))
    w[idx[:-1]] += 0.5 * dt
    w[idx[1:]] += 0.5 * dt
    return w / (t[-1] - t[0])


def window_average(times, values, window) -> float:
    """Trapezoidal average of ``values`` over the samples inside ``window``."""
    times = np.asarray(times, dtype=float)
    return np.tensordot(_trapezoid_weights(times, window), np.asarray(values), axes=(0, 0))


def running_average(times, values) -> np.ndarray:
    """Trapezoidal average over [t_0, t_k] for every k; entry 0 is values[0]."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    integral = cumulative_trapezoid(values, times, initial=0.0)
    out = np.empty_like(values)
    out[0] = values[0]
    out[1:] = integral[1:] / (times[1:] - times[0])
    return out


def octave_discrepancy(times, running, reference: float, length: float) -> float:
    """max |running - reference| over window lengths in [length / 2, length].

    Finite-window averages approach their limit like 1/W times an
    oscillating factor, so single windows can land on a lucky zero; the
    maximum over an octave tracks the decaying envelope instead.
    """
    times = np.asarray(times, dtype=float)
    span = times - times[0]
    slack = 1e-12 * max(1.0, length)
    mask = (span >= 0.5 * length - slack) & (span <= length + slack)
    if not mask.any():
        raise InvalidArgumentError(f"no samples with window length in [{length / 2}, {length}]")
    return float(np.abs(np.asarray(running)[mask] - reference).max())


def _windowed(times, values, window, tol, reference=None) -> WindowedAverage:
    lo, hi = window
    full = float(window_average(times, values, window))
    half = float(window_average(times, values, (lo, 0.5 * (lo + hi))))
    return WindowedAverage(full, half, (float(lo), float(hi)), tol, reference)


def _check_window(window, min_gap):
    if min_gap is not None and min_gap > 0:
        need = 10 * 2 * np.pi / min_gap
        if window[1] - window[0] < need * (1 - 1e-12):
            raise InvalidArgumentError(
                f"window length {window[1] - window[0]:g} is shorter than 10 periods ({need:g})")


def average_state_empirical(traj_I, spec: SpectralDecomposition, window,
                            tol: float = CONVERGENCE_TOL, min_gap: float | None = None) -> AverageState:
    """Trapezoidal time average of |psi_I><psi_I| over ``window``, then dephased."""
    if traj_I.psi_I is None:
        raise InvalidArgumentError("trajectory has no interaction-picture states")
    _check_window(window, min_gap)

    def averaged(w):
        weights = _trapezoid_weights(np.asarray(traj_I.times, float), w)
        psi = traj_I.psi_I
        rho = psi.T @ (weights[:, None] * psi.conj())
        return spec.dephase(rho)

    lo, hi = window
    rho = averaged(window)
    rho_half = averaged((lo, 0.5 * (lo + hi)))
    purity = float(np.sum(np.abs(rho) ** 2))
    change = abs(purity - float(np.sum(np.abs(rho_half) ** 2))) / purity
    return AverageState(rho, "empirical_window", (float(lo), float(hi)), change <= tol, change)


def effective_dimension(rho) -> float:
    """1 / tr(rho**2) for a density matrix or an :class:`AverageState`."""
    if isinstance(rho, AverageState):
        return rho.d_eff
    rho = np.asarray(rho)
    if not is_hermitian(rho, 1e-9):
        raise InvalidArgumentError("density matrix must be Hermitian")
    return 1.0 / float(np.sum(np.abs(rho) ** 2))


def quench_effective_dimension(psi0: np.ndarray, spec: SpectralDecomposition) -> float:
    """1 / sum_n |<E_n|psi0>|**4 after rotating degenerate blocks against psi0."""
    psi0 = np.asarray(psi0)
    if abs(np.linalg.norm(psi0) - 1.0) > NORM_TOL:
        raise InvalidArgumentError("psi0 must be normalized")
    # Level populations do not depend on the basis inside a block, and the
    # rotated block has all weight on its first vector.
    p = level_populations(coefficients(psi0, rotate_degenerate_blocks(spec, psi0)), spec)
    return 1.0 / float(np.sum(p**2))


def expectation_series(psi_rows: np.ndarray, a: np.ndarray) -> np.ndarray:
    """<psi_k|A|psi_k> for each row of ``psi_rows``."""
    psi_rows = np.atleast_2d(psi_rows)
    return np.einsum("ki,ki->k", psi_rows.conj(), psi_rows @ np.asarray(a).T).real


def expectation_from_coefficients(c: np.ndarray, energies: np.ndarray, a_eig: np.ndarray,
                                  times, chunk: int = 256) -> np.ndarray:
    """<A>(t) = sum_nm c_n* c_m A_nm exp(i (E_n - E_m) t) for frozen coefficients.

    ``a_eig`` is A in the eigenbasis whose energies are ``energies``.
    """
    times = np.asarray(times, dtype=float)
    out = np.empty(len(times))
    for s in range(0, len(times), chunk):
        phi = c[:, None] * np.exp(-1j * np.outer(energies, times[s:s + chunk]))
        out[s:s + chunk] = np.einsum("ik,ik->k", phi.conj(), a_eig @ phi).real
    return out


def _series(traj, a):
    return expectation_series(traj.psi, a)


def time_average_expectation(traj, a: np.ndarray, window, rho_bar=None,
                             tol: float = CONVERGENCE_TOL, min_gap: float | None = None) -> WindowedAverage:
    """Window average of <A>(t); ``distance`` compares it with tr(rho_bar A)."""
    _check_window(window, min_gap)
    ref = None
    if rho_bar is not None:
        r = rho_bar.rho if isinstance(rho_bar, AverageState) else np.asarray(rho_bar)
        ref = float(np.trace(r @ a).real)
    return _windowed(traj.times, _series(traj, a), window, tol, ref)


def fluctuation_empirical(traj, a: np.ndarray, window, rho_bar=None, a_bar: float | None = None,
                          tol: float = CONVERGENCE_TOL, min_gap: float | None = None) -> WindowedAverage:
    """Window average of (<A>(t) - A_bar)**2 with A_bar = tr(rho_bar A)."""
    _check_window(window, min_gap)
    if a_bar is None:
        if rho_bar is None:
            raise InvalidArgumentError("need rho_bar or a_bar")
        r = rho_bar.rho if isinstance(rho_bar, AverageState) else np.asarray(rho_bar)
        a_bar = float(np.trace(r @ a).real)
    return _windowed(traj.times, (_series(traj, a) - a_bar) ** 2, window, tol)


def _lead_matrix(a, spec):
    lead = spec.lead_vectors
    a_lead = np.asarray(a) @ lead
    return lead, a_lead, lead.conj().T @ a_lead


def fluctuation_chain(c_inf: np.ndarray, a: np.ndarray, spec: SpectralDecomposition,
                      a_norm: float | None = None) -> FluctuationChain:
    """Closed-form fluctuation and each step of its bound, in the rotated basis."""
    _check_state(c_inf)
    p = _lead_weights(c_inf, spec)
    c = np.asarray(c_inf)[spec.lead_indices]
    _, a_lead, a_nm = _lead_matrix(a, spec)
    terms = np.abs(c.conj()[:, None] * a_nm * c[None, :]) ** 2
    full = float(terms.sum())
    closed = full - float(np.trace(terms))
    # tr(A**2 rho**2) = sum_n p_n**2 <E_n|A**2|E_n> and <E_n|A**2|E_n> = ||A E_n||**2.
    a2_diag = np.sum(np.abs(a_lead) ** 2, axis=0)
    tr_a2_rho2 = float(np.sum(p**2 * a2_diag))
    a_norm = operator_norm(a) if a_norm is None else a_norm
    return FluctuationChain(closed, full, tr_a2_rho2, a_norm**2 * float(np.sum(p**2)))


def fluctuation_closed_form(c_inf: np.ndarray, a: np.ndarray, spec: SpectralDecomposition) -> float:
    """sum_{n != m} |c_n* A_nm c_m|**2 over distinct levels."""
    return fluctuation_chain(c_inf, a, spec, a_norm=0.0).closed


def theorem_bound(a, d_eff: float) -> float:
    """||A||**2 / d_eff; ``a`` may be an operator or its norm."""
    if d_eff < 1 - 1e-9:
        raise InvalidArgumentError(f"d_eff must be >= 1, got {d_eff}")
    a_norm = float(a) if np.isscalar(a) else operator_norm(a)
    return a_norm**2 / d_eff


def check(report: EquilibrationReport) -> bool:
    """Whether the closed-form fluctuation respects the bound."""
    return report.fluct_closed <= report.bound * (1 + BOUND_RTOL)
