"""Dyson-series bounds on the interaction-picture dynamics, and their checks.

With ||dH(t)|| <= K / t**(2+eps) for t >= t*, and
``x(t, tau) = K / (1+eps) * (t**-(1+eps) - tau**-(1+eps))``:

* ``||U_I(tau, t) - 1|| <= exp(x(t, tau)) - 1``          (propagator bound)
* ``|c(inf) - c(t)|    <= exp(x(t, inf)) - 1``           (coefficient convergence)
* ``|zeta(t)|          <= exp(2 x(t, inf)) - 1``         (cross terms of the average)

All three hold only for tau >= t >= t*.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .evolution import (IntegratorConfig, evolve, interaction_propagators,
                        to_interaction_picture)
from .protocols import DecayCertificate, Quench
from .spectral import SpectralDecomposition, diagonalize
from .spin_algebra import operator_norm

__all__ = [
    "BoundSample",
    "rhs_propagator_bound",
    "rhs_convergence_bound",
    "rhs_zeta_bound",
    "default_sample_pairs",
    "verify_propagator_bound",
    "verify_coefficient_bounds",
    "interaction_norm_defect",
]

PASS_RTOL = 1e-9
ABS_SLACK = 1e-8
SAMPLE_POINTS = 16


@dataclass(frozen=True)
class BoundSample:
    """One comparison of a measured quantity against a bound formula."""

    t: float
    tau: float
    lhs: float
    rhs: float
    slack: float = 0.0

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs * (1 + PASS_RTOL) + self.slack

    def to_dict(self) -> dict:
        return {"t": self.t, "tau": self.tau, "lhs": self.lhs, "rhs": self.rhs,
                "slack": self.slack, "pass": self.passed}


def _exponent(K, epsilon, t, tau, t_star):
    if K < 0 or epsilon <= 0:
        raise InvalidArgumentError(f"need K >= 0 and epsilon > 0, got K={K}, epsilon={epsilon}")
    if t_star is not None and t < t_star * (1 - 1e-12):
        raise InvalidArgumentError(f"bound is only certified for t >= t* = {t_star}, got t = {t}")
    if not t > 0 or tau < t:
        raise InvalidArgumentError(f"need 0 < t <= tau, got t={t}, tau={tau}")
    s = 1.0 + epsilon
    tail = 0.0 if math.isinf(tau) else tau ** -s
    return K / s * (t ** -s - tail)


def rhs_propagator_bound(K: float, epsilon: float, t: float, tau: float = math.inf,
                         t_star: float | None = None) -> float:
    """exp(K/(1+eps) * (t^-(1+eps) - tau^-(1+eps))) - 1."""
    return math.expm1(_exponent(K, epsilon, t, tau, t_star))


def rhs_convergence_bound(K: float, epsilon: float, t: float, t_star: float | None = None) -> float:
    """exp(K / ((1+eps) t^(1+eps))) - 1; the tau -> inf limit of the propagator bound."""
    return math.expm1(_exponent(K, epsilon, t, math.inf, t_star))


def rhs_zeta_bound(K: float, epsilon: float, t: float, t_star: float | None = None) -> float:
    """exp(2K / ((1+eps) t^(1+eps))) - 1."""
    return math.expm1(2.0 * _exponent(K, epsilon, t, math.inf, t_star))


def default_sample_pairs(t_star: float, t_max: float, n: int = SAMPLE_POINTS) -> list[tuple[float, float]]:
    """Geometric t in [t*, t_max/10] paired with tau in {2t, 10t, t_max}."""
    if not t_max >= 10 * t_star:
        raise InvalidArgumentError("t_max must be at least 10 t*")
    pairs = []
    for t in np.geomspace(t_star, t_max / 10, n):
        for tau in (2 * t, 10 * t, t_max):
            if t <= tau <= t_max and (float(t), float(tau)) not in pairs:
                pairs.append((float(t), float(tau)))
    return pairs


def _times_of(pairs):
    return np.unique(np.array([x for pair in pairs for x in pair], dtype=float))


def verify_propagator_bound(quench: Quench, certificate: DecayCertificate | None = None,
                            config: IntegratorConfig | None = None, sample_pairs=None,
                            t_max: float | None = None, slack: float = ABS_SLACK,
                            spectral: SpectralDecomposition | None = None) -> list[BoundSample]:
    """Compare ||U_I(tau, t) - 1|| with the propagator bound on sampled (t, tau)."""
    cert = certificate or quench.certificate()
    if sample_pairs is None:
        sample_pairs = default_sample_pairs(cert.t_star, t_max or 100 * cert.t_star)
    spectral = spectral or diagonalize(quench.h_final)
    times = _times_of(sample_pairs)
    u = interaction_propagators(quench, times, config, spectral)
    index = {t: k for k, t in enumerate(times)}
    eye = np.eye(quench.parts.dim)
    out = []
    for t, tau in sample_pairs:
        u_pair = u[index[tau]] @ u[index[t]].conj().T
        lhs = operator_norm(u_pair - eye)
        rhs = rhs_propagator_bound(cert.K, cert.epsilon, t, tau, t_star=cert.t_star)
        out.append(BoundSample(t, tau, lhs, rhs, slack))
    return out


def verify_coefficient_bounds(quench: Quench, psi0: np.ndarray,
                              certificate: DecayCertificate | None = None,
                              config: IntegratorConfig | None = None, sample_pairs=None,
                              t_max: float | None = None, slack: float = ABS_SLACK,
                              spectral: SpectralDecomposition | None = None):
    """Check the coefficient bounds along the trajectory started at ``psi0``.

    Returns ``(pair_samples, limit_samples)``. Pair samples test
    max_{n,k} |c(tau) - c(t)| against the propagator bound. Limit samples use
    c(t_max) in place of c(inf), with the convergence bound at t_max added to
    the slack.
    """
    cert = certificate or quench.certificate()
    t_max = t_max or 100 * cert.t_star
    if sample_pairs is None:
        sample_pairs = default_sample_pairs(cert.t_star, t_max)
    spectral = spectral or diagonalize(quench.h_final)
    times = np.union1d(_times_of(sample_pairs), [t_max])
    traj = to_interaction_picture(evolve(quench, psi0, times[-1], config, times, spectral), spectral)
    c = traj.psi_I @ spectral.vectors.conj()
    index = {t: k for k, t in enumerate(times)}

    pair_samples = []
    for t, tau in sample_pairs:
        lhs = float(np.abs(c[index[tau]] - c[index[t]]).max())
        rhs = rhs_propagator_bound(cert.K, cert.epsilon, t, tau, t_star=cert.t_star)
        pair_samples.append(BoundSample(t, tau, lhs, rhs, slack))

    proxy_slack = slack + rhs_convergence_bound(cert.K, cert.epsilon, t_max, t_star=cert.t_star)
    limit_samples = []
    for t in sorted({t for t, _ in sample_pairs}):
        lhs = float(np.abs(c[index[t_max]] - c[index[t]]).max())
        rhs = rhs_convergence_bound(cert.K, cert.epsilon, t, t_star=cert.t_star)
        limit_samples.append(BoundSample(t, math.inf, lhs, rhs, proxy_slack))
    return pair_samples, limit_samples


def interaction_norm_defect(quench: Quench, times, spectral: SpectralDecomposition | None = None) -> float:
    """max_t | ||dH_I(t)|| - ||dH(t)|| |, which vanishes since the rotation is unitary."""
    spectral = spectral or diagonalize(quench.h_final)
    worst = 0.0
    for t in np.atleast_1d(times):
        dh = quench.at(float(t)) - quench.h_final
        u = spectral.unitary(float(t))
        dh_i = u.conj().T @ dh @ u
        worst = max(worst, abs(operator_norm(dh_i) - operator_norm(dh)))
    return worst
