"""Eigendecomposition of the late-time Hamiltonian with explicit degeneracy blocks.

Eigenvalues closer than ``degeneracy_tol * max(1, ||H||)`` are merged into one
level. Columns of :attr:`SpectralDecomposition.vectors` are ordered by level,
so every block is a contiguous slice.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidArgumentError, NumericalError
from .spin_algebra import is_hermitian

__all__ = [
    "SpectralDecomposition",
    "GapReport",
    "diagonalize",
    "check_gap_degeneracy",
    "rotate_degenerate_blocks",
    "coefficients",
    "level_populations",
]

DEGENERACY_TOL = 1e-9
GAP_TOL = 1e-9
GAP_SCAN_MAX_LEVELS = 512
COMPLETENESS_TOL = 1e-9
PROJECTION_FLOOR = 1e-12
MAX_REPORTED_PAIRS = 10_000


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Orthonormal eigenbasis grouped into distinct energy levels.

    ``column_energies[j]`` is the level energy of column ``j``; columns
    ``block_starts[n]:block_starts[n+1]`` span level ``n``.
    """

    vectors: np.ndarray
    column_energies: np.ndarray
    distinct_energies: np.ndarray
    block_starts: np.ndarray
    degeneracy_tol: float
    scale: float

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @property
    def n_levels(self) -> int:
        return len(self.distinct_energies)

    @property
    def block_sizes(self) -> np.ndarray:
        return np.diff(self.block_starts)

    @property
    def lead_indices(self) -> np.ndarray:
        """Column index of the first vector in each level."""
        return self.block_starts[:-1]

    @property
    def lead_vectors(self) -> np.ndarray:
        return self.vectors[:, self.lead_indices]

    @property
    def level_of_column(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_levels), self.block_sizes)

    def block(self, n: int) -> np.ndarray:
        return self.vectors[:, self.block_starts[n]:self.block_starts[n + 1]]

    def projector(self, n: int) -> np.ndarray:
        b = self.block(n)
        return b @ b.conj().T

    def propagate(self, psi: np.ndarray, t: float) -> np.ndarray:
        """exp(-i H t) psi."""
        c = self.vectors.conj().T @ psi
        return self.vectors @ (np.exp(-1j * self.column_energies * t) * c)

    def unitary(self, t: float) -> np.ndarray:
        """exp(-i H t) as a dense matrix."""
        return (self.vectors * np.exp(-1j * self.column_energies * t)) @ self.vectors.conj().T

    def dephase(self, rho: np.ndarray) -> np.ndarray:
        """sum_n P_n rho P_n over the level projectors."""
        r = self.vectors.conj().T @ rho @ self.vectors
        mask = self.level_of_column[:, None] == self.level_of_column[None, :]
        return self.vectors @ np.where(mask, r, 0) @ self.vectors.conj().T


@dataclass(frozen=True)
class GapReport:
    """Coincidences among the energy gaps E_n - E_m of distinct levels."""

    min_gap_difference: float
    degenerate_gap_pairs: list = field(default_factory=list)
    n_degenerate_pairs: int = 0
    gap_tol: float = GAP_TOL
    n_levels: int = 0

    @property
    def non_degenerate(self) -> bool:
        return self.n_degenerate_pairs == 0

    def to_dict(self) -> dict:
        return {
            "min_gap_difference": self.min_gap_difference,
            "n_degenerate_pairs": self.n_degenerate_pairs,
            "degenerate_gap_pairs": [[list(a), list(b)] for a, b in self.degenerate_gap_pairs[:100]],
            "gap_tol": self.gap_tol,
            "n_levels": self.n_levels,
            "non_degenerate": self.non_degenerate,
        }


def diagonalize(h_inf: np.ndarray, degeneracy_tol: float = DEGENERACY_TOL) -> SpectralDecomposition:
    """Diagonalize a Hermitian matrix and cluster eigenvalues into levels."""
    h_inf = np.asarray(h_inf)
    if h_inf.ndim != 2 or h_inf.shape[0] != h_inf.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {h_inf.shape}")
    if not is_hermitian(h_inf):
        raise InvalidArgumentError("diagonalize needs a Hermitian matrix")
    try:
        w, v = np.linalg.eigh(h_inf)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    scale = max(1.0, float(np.abs(w).max(initial=0.0)))
    breaks = np.flatnonzero(np.diff(w) > degeneracy_tol * scale) + 1
    starts = np.concatenate(([0], breaks, [len(w)]))
    distinct = np.array([w[a:b].mean() for a, b in zip(starts[:-1], starts[1:])])
    v = v.astype(np.complex128, copy=True)
    for a, b in zip(starts[:-1], starts[1:]):
        if b - a > 1:
            v[:, a:b], _ = np.linalg.qr(v[:, a:b])
    column_energies = np.repeat(distinct, np.diff(starts))
    return SpectralDecomposition(v, column_energies, distinct, starts, degeneracy_tol, scale)


def _gap_table(energies):
    n = len(energies)
    rows, cols = np.nonzero(~np.eye(n, dtype=bool))
    return energies[rows] - energies[cols], rows, cols


def check_gap_degeneracy(spec: SpectralDecomposition, gap_tol: float = GAP_TOL,
                         max_levels: int = GAP_SCAN_MAX_LEVELS) -> GapReport:
    """Find pairs of ordered level pairs (n, m) != (p, q) with equal gaps.

    Gaps are sorted, so every pair within ``gap_tol * scale`` is found by a
    forward scan; the result equals an exhaustive comparison of all pairs.
    """
    E = spec.distinct_energies
    L = len(E)
    if L > max_levels:
        raise InvalidArgumentError(
            f"gap scan over {L} levels exceeds max_levels={max_levels}; raise it to opt in")
    if L < 2:
        return GapReport(np.inf, [], 0, gap_tol, L)
    gaps, rows, cols = _gap_table(E)
    order = np.argsort(gaps, kind="stable")
    g = gaps[order]
    tol = gap_tol * spec.scale
    min_diff = float(np.diff(g).min()) if len(g) > 1 else np.inf
    hi = np.searchsorted(g, g + tol, side="right")
    pairs, count = [], 0
    for i in np.flatnonzero(hi > np.arange(len(g)) + 1):
        for j in range(i + 1, hi[i]):
            count += 1
            if len(pairs) < MAX_REPORTED_PAIRS:
                a = (int(rows[order[i]]), int(cols[order[i]]))
                b = (int(rows[order[j]]), int(cols[order[j]]))
                pairs.append((min(a, b), max(a, b)))
    pairs.sort()
    return GapReport(min_diff, pairs, count, gap_tol, L)


def rotate_degenerate_blocks(spec: SpectralDecomposition, psi_ref: np.ndarray) -> SpectralDecomposition:
    """Rotate each degenerate block so ``psi_ref`` overlaps only its first vector.

    Blocks where the projection of ``psi_ref`` is below 1e-12 are left as is.
    """
    psi_ref = np.asarray(psi_ref)
    if psi_ref.shape != (spec.dim,):
        raise InvalidArgumentError(f"state has shape {psi_ref.shape}, expected ({spec.dim},)")
    v = spec.vectors.copy()
    for a, b in zip(spec.block_starts[:-1], spec.block_starts[1:]):
        k = b - a
        if k == 1:
            continue
        block = v[:, a:b]
        amp = block.conj().T @ psi_ref
        norm = np.linalg.norm(amp)
        if norm <= PROJECTION_FLOOR:
            continue
        lead = amp / norm
        q, _ = np.linalg.qr(np.column_stack([lead, np.eye(k, dtype=np.complex128)]))
        q = q[:, :k]
        # QR fixes the first column only up to a phase.
        q[:, 0] = lead
        v[:, a:b] = block @ q
    return replace(spec, vectors=v)


def coefficients(psi: np.ndarray, spec: SpectralDecomposition) -> np.ndarray:
    """Overlaps <E_{n,k}|psi> in column order of ``spec.vectors``."""
    psi = np.asarray(psi)
    if psi.shape[0] != spec.dim:
        raise InvalidArgumentError(f"state dimension {psi.shape[0]} != basis dimension {spec.dim}")
    c = spec.vectors.conj().T @ psi
    defect = abs(np.vdot(c, c).real - np.vdot(psi, psi).real)
    if defect > COMPLETENESS_TOL:
        raise NumericalError(f"basis is not complete: population defect {defect:.3e}")
    return c


def level_populations(c: np.ndarray, spec: SpectralDecomposition) -> np.ndarray:
    """Weight sum_k |c_n^k|**2 of each distinct level (basis independent)."""
    return np.add.reduceat(np.abs(c) ** 2, spec.lead_indices)
