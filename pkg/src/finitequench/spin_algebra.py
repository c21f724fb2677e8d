"""Dense many-body spin operators for open spin-1/2 chains.

Operators are plain ``complex128`` arrays of shape ``(2**n, 2**n)``. Site 1 is
the leftmost Kronecker factor, and the single-site basis is ``|0> = (1, 0)``,
the +z eigenstate.

The chain Hamiltonian is split into a static part and two coupling blocks at
unit strength::

    H(t) = h_static + J1(t) * h_j1 + J2(t) * h_j2

    h_j1   = sum_{i=1}^{N-1} (X_i X_{i+1} + Y_i Y_{i+1} + d Z_i Z_{i+1})
    h_j2   = sum_{i=1}^{N-2} (X_i X_{i+2} + Y_i Y_{i+2} + d Z_i Z_{i+2})
    h_static = sum_{i=1}^{N} (h_x X_i + h_z Z_i) + e X_1
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidArgumentError, NumericalError

__all__ = [
    "Convention",
    "ChainSpec",
    "HamiltonianParts",
    "PAULI",
    "single_site_operator",
    "two_site_operator",
    "total_spin",
    "build_hamiltonian_parts",
    "operator_norm",
    "expectation",
    "is_hermitian",
    "commutator",
]

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}

HERMITIAN_RTOL = 1e-12
EXPECTATION_IMAG_TOL = 1e-10
NORM_TOL = 1e-10


class Convention(str, Enum):
    """Single-site spin matrices: bare Pauli matrices or S = sigma / 2."""

    PAULI = "pauli"
    SPIN_HALF = "spin_half"

    @property
    def scale(self) -> float:
        return 1.0 if self is Convention.PAULI else 0.5


@dataclass(frozen=True)
class ChainSpec:
    """Parameters of the defect spin chain (energies in units with hbar = 1).

    The defaults are the values used for the magnetization study: h_x = 0.2,
    h_z = 0, d = 0.5, e = 0.2 with final couplings J1 = 1.0 and J2 = 0.9.
    """

    n_sites: int
    h_x: float = 0.2
    h_z: float = 0.0
    anisotropy_d: float = 0.5
    defect_e: float = 0.2
    j1_final: float = 1.0
    j2_final: float = 0.9
    spin_convention: Convention = Convention.PAULI

    def __post_init__(self):
        if isinstance(self.n_sites, bool) or int(self.n_sites) != self.n_sites:
            raise InvalidArgumentError(f"n_sites must be an integer, got {self.n_sites!r}")
        if self.n_sites < 2:
            raise InvalidArgumentError(f"n_sites must be >= 2, got {self.n_sites}")
        for name in ("h_x", "h_z", "anisotropy_d", "defect_e", "j1_final", "j2_final"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise InvalidArgumentError(f"{name} must be finite, got {value!r}")
        object.__setattr__(self, "n_sites", int(self.n_sites))
        object.__setattr__(self, "spin_convention", Convention(self.spin_convention))

    @property
    def dim(self) -> int:
        return 2**self.n_sites


@dataclass(frozen=True, eq=False)
class HamiltonianParts:
    """Static part and unit-coupling blocks of the chain Hamiltonian."""

    h_static: np.ndarray
    h_j1: np.ndarray
    h_j2: np.ndarray

    @property
    def dim(self) -> int:
        return self.h_static.shape[0]

    def assemble(self, j1: float, j2: float) -> np.ndarray:
        """Return ``h_static + j1 * h_j1 + j2 * h_j2``."""
        return self.h_static + j1 * self.h_j1 + j2 * self.h_j2


def _check_site(site, n_sites):
    if not 1 <= site <= n_sites:
        raise InvalidArgumentError(f"site must lie in [1, {n_sites}], got {site}")


def _embed(factors: dict[int, np.ndarray], n_sites: int) -> np.ndarray:
    # Runs of identities are folded into a single np.eye to keep kron cheap.
    out = np.ones((1, 1), dtype=np.complex128)
    run = 0
    for site in range(1, n_sites + 1):
        if site in factors:
            if run:
                out = np.kron(out, np.eye(2**run))
                run = 0
            out = np.kron(out, factors[site])
        else:
            run += 1
    if run:
        out = np.kron(out, np.eye(2**run))
    return out


def single_site_operator(axis: str, site: int, n_sites: int,
                        convention: Convention | str = Convention.PAULI) -> np.ndarray:
    """Embed the spin matrix along ``axis`` at 1-based ``site`` of an n-site chain.

    >>> single_site_operator("z", 2, 2).diagonal().real
    array([ 1., -1.,  1., -1.])
    """
    if axis not in PAULI:
        raise InvalidArgumentError(f"axis must be one of x, y, z; got {axis!r}")
    _check_site(site, n_sites)
    scale = Convention(convention).scale
    return _embed({site: scale * PAULI[axis]}, n_sites)


def two_site_operator(axis: str, site_a: int, site_b: int, n_sites: int,
                      convention: Convention | str = Convention.PAULI) -> np.ndarray:
    """Product S_a^axis S_b^axis for two distinct sites."""
    if axis not in PAULI:
        raise InvalidArgumentError(f"axis must be one of x, y, z; got {axis!r}")
    _check_site(site_a, n_sites)
    _check_site(site_b, n_sites)
    if site_a == site_b:
        raise InvalidArgumentError("two_site_operator needs two distinct sites")
    s = Convention(convention).scale * PAULI[axis]
    return _embed({site_a: s, site_b: s}, n_sites)


def total_spin(axis: str, n_sites: int,
               convention: Convention | str = Convention.PAULI) -> np.ndarray:
    """Total magnetization sum_i S_i^axis."""
    out = np.zeros((2**n_sites, 2**n_sites), dtype=np.complex128)
    for site in range(1, n_sites + 1):
        out += single_site_operator(axis, site, n_sites, convention)
    return out


def _coupling_block(n_sites, distance, d, convention):
    dim = 2**n_sites
    block = np.zeros((dim, dim), dtype=np.complex128)
    for i in range(1, n_sites - distance + 1):
        j = i + distance
        block += two_site_operator("x", i, j, n_sites, convention)
        block += two_site_operator("y", i, j, n_sites, convention)
        block += d * two_site_operator("z", i, j, n_sites, convention)
    return block


def build_hamiltonian_parts(spec: ChainSpec) -> HamiltonianParts:
    """Build the static part and the nearest/next-nearest coupling blocks.

    Open boundaries; the next-nearest block is the zero operator for N = 2.
    """
    n, conv = spec.n_sites, spec.spin_convention
    h_static = np.zeros((spec.dim, spec.dim), dtype=np.complex128)
    for site in range(1, n + 1):
        if spec.h_x:
            h_static += spec.h_x * single_site_operator("x", site, n, conv)
        if spec.h_z:
            h_static += spec.h_z * single_site_operator("z", site, n, conv)
    if spec.defect_e:
        h_static += spec.defect_e * single_site_operator("x", 1, n, conv)
    h_j1 = _coupling_block(n, 1, spec.anisotropy_d, conv)
    h_j2 = _coupling_block(n, 2, spec.anisotropy_d, conv)
    return HamiltonianParts(h_static=h_static, h_j1=h_j1, h_j2=h_j2)


def is_hermitian(a: np.ndarray, rtol: float = HERMITIAN_RTOL) -> bool:
    scale = np.abs(a).max() if a.size else 0.0
    return bool(np.abs(a - a.conj().T).max(initial=0.0) <= rtol * scale)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def operator_norm(a: np.ndarray) -> float:
    """Operator (spectral) norm; max |eigenvalue| for Hermitian input."""
    a = np.asarray(a)
    if not np.all(np.isfinite(a)):
        raise InvalidArgumentError("operator has non-finite entries")
    if a.size == 0:
        return 0.0
    if is_hermitian(a):
        w = np.linalg.eigvalsh(a)
        return float(np.abs(w).max())
    return float(np.linalg.norm(a, 2))


def expectation(a: np.ndarray, psi: np.ndarray) -> float:
    """Real expectation value <psi|a|psi> of a Hermitian operator."""
    psi = np.asarray(psi)
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > NORM_TOL:
        raise InvalidArgumentError(f"state is not normalized (norm = {norm!r})")
    value = np.vdot(psi, a @ psi)
    if abs(value.imag) > EXPECTATION_IMAG_TOL:
        raise NumericalError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)
