"""Switching schedules lambda(t) and the ramped Hamiltonian H(t) = H_i + lambda(t) dH.

Three schedules are supported:

* ``sudden``: lambda(0) = 0 and lambda(t) = 1 for t > 0.
* ``linear_ramp``: lambda = t / T up to T, then 1.
* ``linear_then_powerlaw``: lambda = t / t* up to t*, then (t* / t)**p. The
  perturbation is switched on and fades away again, so the Hamiltonian
  returns to H_i at late times.

The late-time Hamiltonian is ``H_inf = H_i + lambda_inf * dH`` with
``lambda_inf`` the limit of the schedule (1 for the first two kinds, 0 for
the power-law tail), and ``dH(t) = H(t) - H_inf``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np

from .errors import InvalidArgumentError, UncertifiableProtocolError
from .spin_algebra import HamiltonianParts, operator_norm

__all__ = [
    "ProtocolKind",
    "QuenchProtocol",
    "DecayCertificate",
    "CertificateCheck",
    "Quench",
    "lambda_at",
    "hamiltonian_at",
    "delta_h_norm_at",
    "decay_certificate",
    "verify_certificate",
]

CERTIFICATE_SAMPLES = 64
CERTIFICATE_SPAN = 1000.0
PASS_RTOL = 1e-9


class ProtocolKind(str, Enum):
    SUDDEN = "sudden"
    LINEAR_RAMP = "linear_ramp"
    LINEAR_THEN_POWERLAW = "linear_then_powerlaw"


@dataclass(frozen=True)
class QuenchProtocol:
    """Schedule lambda(t) shared by both couplings.

    For ``linear_ramp`` the certified time ``t_star`` defaults to the ramp
    duration; for ``linear_then_powerlaw`` the ramp duration is ``t_star``.
    """

    kind: ProtocolKind
    ramp_duration: float | None = None
    tail_power: float | None = None
    t_star: float | None = None

    def __post_init__(self):
        kind = ProtocolKind(self.kind)
        object.__setattr__(self, "kind", kind)
        T, p, ts = self.ramp_duration, self.tail_power, self.t_star
        if kind is ProtocolKind.SUDDEN:
            if T is not None or p is not None or ts is not None:
                raise InvalidArgumentError("sudden protocol takes no duration, power or t_star")
        elif kind is ProtocolKind.LINEAR_RAMP:
            if T is None or not np.isfinite(T) or T <= 0:
                raise InvalidArgumentError(f"ramp_duration must be > 0, got {T!r}")
            if p is not None:
                raise InvalidArgumentError("linear_ramp takes no tail_power")
            ts = T if ts is None else ts
            if ts < T:
                raise InvalidArgumentError("t_star must not precede the end of the ramp")
            object.__setattr__(self, "t_star", float(ts))
        else:
            ts = T if ts is None else ts
            if ts is None or not np.isfinite(ts) or ts <= 0:
                raise InvalidArgumentError(f"t_star must be > 0, got {ts!r}")
            if T is not None and T != ts:
                raise InvalidArgumentError("for linear_then_powerlaw the ramp lasts exactly t_star")
            if p is None or not np.isfinite(p) or p <= 0:
                raise InvalidArgumentError(f"tail_power must be > 0, got {p!r}")
            object.__setattr__(self, "ramp_duration", float(ts))
            object.__setattr__(self, "t_star", float(ts))

    @classmethod
    def sudden(cls) -> QuenchProtocol:
        return cls(ProtocolKind.SUDDEN)

    @classmethod
    def linear_ramp(cls, duration: float) -> QuenchProtocol:
        return cls(ProtocolKind.LINEAR_RAMP, ramp_duration=duration)

    @classmethod
    def linear_then_powerlaw(cls, t_star: float, power: float = 3.0) -> QuenchProtocol:
        return cls(ProtocolKind.LINEAR_THEN_POWERLAW, tail_power=power, t_star=t_star)

    @property
    def ramp_end(self) -> float:
        """End of the linear segment (0 for a sudden quench)."""
        return 0.0 if self.kind is ProtocolKind.SUDDEN else float(self.ramp_duration)

    @property
    def lambda_infinity(self) -> float:
        return 0.0 if self.kind is ProtocolKind.LINEAR_THEN_POWERLAW else 1.0

    def lam(self, t: float) -> float:
        if t < 0 or not np.isfinite(t):
            raise InvalidArgumentError(f"time must be finite and >= 0, got {t!r}")
        if self.kind is ProtocolKind.SUDDEN:
            return 0.0 if t == 0 else 1.0
        T = self.ramp_duration
        if t <= T:
            return t / T
        if self.kind is ProtocolKind.LINEAR_RAMP:
            return 1.0
        return (T / t) ** self.tail_power


def lambda_at(protocol: QuenchProtocol, t: float) -> float:
    """Value of the switching function at time ``t >= 0``."""
    return protocol.lam(t)


@dataclass(frozen=True)
class DecayCertificate:
    """Witness that ||dH(t)|| <= K / t**(2 + epsilon) for all t >= t_star."""

    K: float
    epsilon: float
    t_star: float

    def __post_init__(self):
        if self.K < 0 or self.epsilon <= 0 or self.t_star <= 0:
            raise InvalidArgumentError(f"invalid certificate {self}")

    def rhs(self, t):
        return self.K / np.asarray(t, dtype=float) ** (2.0 + self.epsilon)

    def scaled(self, factor: float) -> DecayCertificate:
        """Same certificate with K multiplied by ``factor`` (falsification runs)."""
        return DecayCertificate(self.K * factor, self.epsilon, self.t_star)


@dataclass(frozen=True, eq=False)
class CertificateCheck:
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    passed: np.ndarray
    worst_ratio: float

    @property
    def all_passed(self) -> bool:
        return bool(np.all(self.passed))


@dataclass(frozen=True, eq=False)
class Quench:
    """Chain Hamiltonian parts driven by one schedule towards final couplings."""

    parts: HamiltonianParts
    protocol: QuenchProtocol
    j1_final: float = 1.0
    j2_final: float = 0.9

    @cached_property
    def delta_h(self) -> np.ndarray:
        return self.j1_final * self.parts.h_j1 + self.j2_final * self.parts.h_j2

    @property
    def h_initial(self) -> np.ndarray:
        return self.parts.h_static

    @cached_property
    def h_final(self) -> np.ndarray:
        return self.parts.h_static + self.protocol.lambda_infinity * self.delta_h

    @cached_property
    def delta_h_norm(self) -> float:
        return operator_norm(self.delta_h)

    @cached_property
    def norm_bound(self) -> float:
        """max_t ||H(t)||; exact for schedules with lambda in [0, 1] by convexity."""
        return max(operator_norm(self.parts.h_static),
                   operator_norm(self.parts.h_static + self.delta_h))

    def lam(self, t: float) -> float:
        return self.protocol.lam(t)

    def at(self, t: float) -> np.ndarray:
        return self.parts.h_static + self.lam(t) * self.delta_h

    def delta_norm(self, t: float) -> float:
        """||H(t) - H_inf|| = |lambda(t) - lambda_inf| * ||dH||."""
        return abs(self.lam(t) - self.protocol.lambda_infinity) * self.delta_h_norm

    def settle_time(self, cutoff: float) -> float:
        """Earliest time after which ||H(t) - H_inf|| <= cutoff for good."""
        p = self.protocol
        if p.kind is ProtocolKind.SUDDEN:
            return 0.0
        if p.kind is ProtocolKind.LINEAR_RAMP or self.delta_h_norm <= cutoff:
            return p.ramp_end
        return p.t_star * (self.delta_h_norm / cutoff) ** (1.0 / p.tail_power)

    def certificate(self) -> DecayCertificate:
        p = self.protocol
        if p.kind is ProtocolKind.SUDDEN:
            raise UncertifiableProtocolError(
                "a sudden quench has no finite t* > 0; certify a linear ramp with small T instead")
        if p.kind is ProtocolKind.LINEAR_RAMP:
            return DecayCertificate(K=0.0, epsilon=1.0, t_star=p.t_star)
        if p.tail_power <= 2:
            raise UncertifiableProtocolError(
                f"tail (t*/t)**{p.tail_power} does not decay faster than t**-2")
        return DecayCertificate(K=p.t_star**p.tail_power * self.delta_h_norm,
                                epsilon=p.tail_power - 2.0, t_star=p.t_star)


def hamiltonian_at(parts: HamiltonianParts, protocol: QuenchProtocol,
                   j1_final: float, j2_final: float, t: float) -> np.ndarray:
    """H(t) = h_static + lambda(t) * (j1_final * h_j1 + j2_final * h_j2)."""
    lam = protocol.lam(t)
    return parts.h_static + lam * j1_final * parts.h_j1 + lam * j2_final * parts.h_j2


def delta_h_norm_at(parts: HamiltonianParts, protocol: QuenchProtocol,
                    j_finals: tuple[float, float], t: float) -> float:
    return Quench(parts, protocol, *j_finals).delta_norm(t)


def decay_certificate(parts: HamiltonianParts, protocol: QuenchProtocol,
                      j_finals: tuple[float, float]) -> DecayCertificate:
    """Constants (K, epsilon, t*) bounding the late-time tail of dH(t)."""
    return Quench(parts, protocol, *j_finals).certificate()


def _check_quench(quench: Quench, cert: DecayCertificate, samples: int) -> CertificateCheck:
    if samples < 10:
        raise InvalidArgumentError("verify_certificate needs at least 10 samples")
    times = np.geomspace(cert.t_star, CERTIFICATE_SPAN * cert.t_star, samples)
    lhs = np.array([quench.delta_norm(t) for t in times])
    rhs = cert.rhs(times)
    passed = lhs <= rhs * (1 + PASS_RTOL)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(rhs > 0, lhs / rhs, np.where(lhs > 0, np.inf, 0.0))
    return CertificateCheck(times, lhs, rhs, passed, float(ratios.max()))


def verify_certificate(cert: DecayCertificate, parts: HamiltonianParts,
                       protocol: QuenchProtocol, j_finals: tuple[float, float],
                       samples: int = CERTIFICATE_SAMPLES) -> CertificateCheck:
    """Sample ||dH(t)|| <= K / t**(2+eps) on a geometric grid in [t*, 1000 t*]."""
    return _check_quench(Quench(parts, protocol, *j_finals), cert, samples)
