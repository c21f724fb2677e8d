from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finitequench.errors import InvalidArgumentError, NumericalError
from finitequench.evolution import evolve, ground_state
from finitequench.protocols import Quench, QuenchProtocol
from finitequench.spectral import (check_gap_degeneracy, coefficients, diagonalize,
                                   level_populations, rotate_degenerate_blocks)
from finitequench.spin_algebra import PAULI

from oracles import chain_hamiltonian, gap_pairs_bruteforce, min_gap_difference_bruteforce


def random_unitary(dim, rng):
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def hamiltonian_with(energies, rng):
    u = random_unitary(len(energies), rng)
    h = (u * np.asarray(energies, float)) @ u.conj().T
    return (h + h.conj().T) / 2


class TestDiagonalize:
    def test_degenerate_block(self):
        spec = diagonalize(np.diag([1.0, 1.0, 2.0]).astype(complex), degeneracy_tol=1e-8)
        np.testing.assert_array_equal(spec.block_sizes, [2, 1])
        np.testing.assert_allclose(spec.distinct_energies, [1.0, 2.0])

    def test_pauli_x(self):
        np.testing.assert_allclose(diagonalize(PAULI["x"]).distinct_energies, [-1.0, 1.0])

    def test_final_three_site_spectrum_is_simple(self):
        spec = diagonalize(chain_hamiltonian(3))
        assert spec.n_levels == 8
        assert np.all(spec.block_sizes == 1)

    def test_invariants(self, rng):
        h = hamiltonian_with([0.0, 0.0, 0.0, 1.5, 1.5, 3.0, -2.0], rng)
        spec = diagonalize(h)
        v = spec.vectors
        assert np.abs(v.conj().T @ v - np.eye(7)).max() <= 1e-10
        resid = h @ v - v * spec.column_energies
        assert np.abs(resid).max() <= 1e-8 * np.abs(np.linalg.eigvalsh(h)).max()
        assert np.all(np.diff(spec.distinct_energies) > spec.degeneracy_tol)
        np.testing.assert_array_equal(spec.block_sizes, [1, 3, 2, 1])
        assert np.abs(v @ v.conj().T - np.eye(7)).max() <= 1e-9

    def test_rejects_non_square(self):
        with pytest.raises(InvalidArgumentError):
            diagonalize(np.zeros((2, 3)))

    def test_dephase_keeps_block_diagonal(self, rng):
        spec = diagonalize(hamiltonian_with([0.0, 0.0, 1.0, 2.0], rng))
        psi = rng.normal(size=4) + 1j * rng.normal(size=4)
        psi /= np.linalg.norm(psi)
        rho = spec.dephase(np.outer(psi, psi.conj()))
        expected = sum(spec.projector(n) @ np.outer(psi, psi.conj()) @ spec.projector(n)
                       for n in range(spec.n_levels))
        np.testing.assert_allclose(rho, expected, atol=1e-12)


class TestGapDegeneracy:
    def spec_of(self, energies):
        return diagonalize(np.diag(np.asarray(energies, dtype=complex)))

    def test_equally_spaced(self):
        report = check_gap_degeneracy(self.spec_of([0.0, 1.0, 2.0]))
        assert not report.non_degenerate
        assert ((0, 1), (1, 2)) in report.degenerate_gap_pairs

    def test_generic(self):
        report = check_gap_degeneracy(self.spec_of([0.0, 1.0, 2.5]))
        assert report.non_degenerate
        assert report.min_gap_difference == pytest.approx(0.5)

    def test_three_site_chain(self):
        report = check_gap_degeneracy(diagonalize(chain_hamiltonian(3)))
        energies = np.linalg.eigvalsh(chain_hamiltonian(3))
        assert report.non_degenerate
        assert report.min_gap_difference == pytest.approx(min_gap_difference_bruteforce(energies), abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(base=st.lists(st.integers(-6, 6), min_size=2, max_size=7, unique=True),
           jitter=st.lists(st.floats(0, 0.3), min_size=7, max_size=7))
    def test_scan_matches_bruteforce(self, base, jitter):
        # Integer levels give many exact coincidences; jitter breaks some of them.
        energies = np.array(sorted(b + (j if k % 2 else 0.0) for k, (b, j) in enumerate(zip(base, jitter))))
        if np.any(np.diff(energies) <= 1e-6):
            return
        spec = self.spec_of(energies)
        report = check_gap_degeneracy(spec, gap_tol=1e-9)
        expected = gap_pairs_bruteforce(spec.distinct_energies, 1e-9 * spec.scale)
        assert report.degenerate_gap_pairs == expected
        assert report.n_degenerate_pairs == len(expected)
        assert report.min_gap_difference == pytest.approx(
            min_gap_difference_bruteforce(spec.distinct_energies), abs=1e-12)

    def test_level_cap(self):
        spec = self.spec_of(np.arange(20) ** 1.5)
        with pytest.raises(InvalidArgumentError):
            check_gap_degeneracy(spec, max_levels=10)
        assert check_gap_degeneracy(spec, max_levels=20).n_levels == 20

    def test_serializes(self):
        d = check_gap_degeneracy(self.spec_of([0.0, 1.0, 2.0])).to_dict()
        assert d["non_degenerate"] is False and d["n_degenerate_pairs"] > 0


class TestRotation:
    def test_nondegenerate_unchanged(self, rng):
        spec = diagonalize(hamiltonian_with([0.0, 1.0, 3.0], rng))
        psi = np.ones(3) / np.sqrt(3)
        np.testing.assert_array_equal(rotate_degenerate_blocks(spec, psi).vectors, spec.vectors)

    def test_two_dimensional_block(self):
        spec = diagonalize(np.diag([0.0, 0.0, 1.0]).astype(complex))
        psi = np.array([1.0, 1.0, 0.0]) / np.sqrt(2)
        rot = rotate_degenerate_blocks(spec, psi)
        np.testing.assert_allclose(rot.vectors[:, 0], psi, atol=1e-14)
        assert abs(np.vdot(rot.vectors[:, 0], rot.vectors[:, 1])) <= 1e-14
        np.testing.assert_allclose(rot.vectors[:2, 1] * np.sqrt(2) * np.conj(rot.vectors[0, 1]) / abs(rot.vectors[0, 1]),
                                   [1, -1], atol=1e-12)

    def test_support_moves_to_first_vector(self, rng):
        spec = diagonalize(hamiltonian_with([0.0, 0.0, 0.0, 1.0, 1.0, 2.0], rng))
        psi = rng.normal(size=6) + 1j * rng.normal(size=6)
        psi /= np.linalg.norm(psi)
        rot = rotate_degenerate_blocks(spec, psi)
        c = coefficients(psi, rot)
        mask = np.ones(6, bool)
        mask[rot.lead_indices] = False
        assert np.abs(c[mask]).max() <= 1e-12
        np.testing.assert_allclose(level_populations(c, rot), level_populations(coefficients(psi, spec), spec))
        h = (rot.vectors * rot.column_energies) @ rot.vectors.conj().T
        np.testing.assert_allclose(h, (spec.vectors * spec.column_energies) @ spec.vectors.conj().T, atol=1e-12)

    def test_purity_invariant(self, rng):
        # Synthetic 4-level example with a two-fold degenerate level.
        spec = diagonalize(hamiltonian_with([0.0, 0.7, 0.7, 1.9], rng))
        psi = rng.normal(size=4) + 1j * rng.normal(size=4)
        psi /= np.linalg.norm(psi)
        rho = np.outer(psi, psi.conj())
        before = np.sum(np.abs(spec.dephase(rho)) ** 2)
        rot = rotate_degenerate_blocks(spec, psi)
        after = np.sum(np.abs(rot.dephase(rho)) ** 2)
        assert abs(before - after) <= 1e-10

    def test_block_without_support_left_alone(self):
        spec = diagonalize(np.diag([0.0, 0.0, 1.0]).astype(complex))
        rot = rotate_degenerate_blocks(spec, np.array([0, 0, 1.0]))
        np.testing.assert_array_equal(rot.vectors, spec.vectors)

    def test_shape_check(self):
        spec = diagonalize(np.eye(2, dtype=complex))
        with pytest.raises(InvalidArgumentError):
            rotate_degenerate_blocks(spec, np.ones(3))


class TestCoefficients:
    def test_eigenvector(self):
        spec = diagonalize(chain_hamiltonian(3))
        c = coefficients(spec.vectors[:, 3], spec)
        expected = np.zeros(8)
        expected[3] = 1
        np.testing.assert_allclose(np.abs(c), expected, atol=1e-12)

    def test_two_site_run_against_direct_overlaps(self, parts2):
        q = Quench(parts2, QuenchProtocol.linear_ramp(1.0))
        spec = diagonalize(q.h_final)
        psi = evolve(q, ground_state(parts2.h_static).vector, 1.0, times=[1.0]).psi[-1]
        c = coefficients(psi, spec)
        w, v = np.linalg.eigh(chain_hamiltonian(2))
        # Nondegenerate levels: overlaps agree up to the eigenvector phase.
        np.testing.assert_allclose(np.abs(c), np.abs(v.conj().T @ psi), atol=1e-12)
        assert np.sum(np.abs(c) ** 2) == pytest.approx(1.0, abs=1e-12)

    def test_incomplete_basis_detected(self):
        spec = diagonalize(np.diag([0.0, 1.0, 2.0]).astype(complex))
        broken = replace(spec, vectors=spec.vectors[:, [0, 1, 1]])
        with pytest.raises(NumericalError):
            coefficients(np.array([0, 0, 1.0]), broken)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            coefficients(np.ones(2), diagonalize(np.eye(3, dtype=complex)))
