import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finitequench.errors import InvalidArgumentError, UncertifiableProtocolError
from finitequench.protocols import (DecayCertificate, ProtocolKind, Quench, QuenchProtocol,
                                    decay_certificate, delta_h_norm_at, hamiltonian_at,
                                    lambda_at, verify_certificate)
from finitequench.spin_algebra import HamiltonianParts, PAULI

JF = (1.0, 0.9)
DH_NORM_3 = 3.3837057495671385  # bit-construction oracle, eigvalsh of dH for N = 3


def toy_parts(scale=1.0):
    # dH = scale * sigma_x, so ||dH|| = scale.
    zero = np.zeros((2, 2), dtype=complex)
    return HamiltonianParts(PAULI["z"].copy(), scale * PAULI["x"], zero)


class TestLambda:
    def test_ramp_values(self):
        ramp = QuenchProtocol.linear_ramp(10.0)
        assert lambda_at(ramp, 0.0) == 0.0
        assert lambda_at(ramp, 5.0) == 0.5
        assert lambda_at(ramp, 10.0) == 1.0
        assert lambda_at(ramp, 1e6) == 1.0

    def test_power_law_tail(self):
        p = QuenchProtocol.linear_then_powerlaw(2.0, 3)
        assert lambda_at(p, 4.0) == pytest.approx(0.125)
        assert lambda_at(p, 1.0) == 0.5
        assert lambda_at(p, 2.0) == 1.0

    def test_sudden(self):
        s = QuenchProtocol.sudden()
        assert lambda_at(s, 0.0) == 0.0
        assert lambda_at(s, 1e-300) == 1.0

    def test_negative_time(self):
        with pytest.raises(InvalidArgumentError):
            lambda_at(QuenchProtocol.linear_ramp(1.0), -0.1)

    @pytest.mark.parametrize("kwargs", [
        dict(kind="linear_ramp", ramp_duration=0.0),
        dict(kind="linear_ramp", ramp_duration=-1.0),
        dict(kind="linear_ramp"),
        dict(kind="linear_then_powerlaw", t_star=1.0),
        dict(kind="linear_then_powerlaw", t_star=1.0, tail_power=-1.0),
        dict(kind="sudden", ramp_duration=1.0),
        dict(kind="quadratic", ramp_duration=1.0),
    ])
    def test_invalid_protocols(self, kwargs):
        with pytest.raises((InvalidArgumentError, ValueError)):
            QuenchProtocol(**kwargs)

    def test_tail_is_steeper_than_ramp(self):
        proto = QuenchProtocol.linear_then_powerlaw(1.0, 3.0)
        slope = (proto.lam(1.0 + 1e-7) - proto.lam(1.0)) / 1e-7
        assert slope == pytest.approx(-3.0, rel=1e-5)

    @settings(max_examples=50, deadline=None)
    @given(T=st.floats(1e-3, 1e3), p=st.floats(0.1, 6),
           ts=st.lists(st.floats(0, 1e4), min_size=2, max_size=20))
    def test_range_monotone_and_lipschitz(self, T, p, ts):
        ts = sorted(ts)
        # The tail (T/t)**p leaves t = T with slope -p/T.
        for proto, rate in ((QuenchProtocol.linear_ramp(T), 1 / T),
                            (QuenchProtocol.linear_then_powerlaw(T, p), max(1.0, p) / T)):
            lam = np.array([proto.lam(t) for t in ts])
            assert np.all((lam >= 0) & (lam <= 1))
            assert np.all(np.abs(np.diff(lam)) <= np.diff(ts) * rate * (1 + 1e-9) + 1e-15)
        ramp = np.array([QuenchProtocol.linear_ramp(T).lam(t) for t in ts])
        assert np.all(np.diff(ramp) >= 0)


class TestHamiltonianAt:
    def test_endpoints_and_midpoint(self, parts3):
        ramp = QuenchProtocol.linear_ramp(2.0)
        h0 = hamiltonian_at(parts3, ramp, *JF, 0.0)
        h_inf = hamiltonian_at(parts3, ramp, *JF, 2.0)
        np.testing.assert_array_equal(h0, parts3.h_static)
        np.testing.assert_allclose(h_inf, parts3.h_static + parts3.h_j1 + 0.9 * parts3.h_j2, atol=1e-14)
        np.testing.assert_allclose(hamiltonian_at(parts3, ramp, *JF, 1.0), (h0 + h_inf) / 2, atol=1e-14)

    def test_short_ramp_is_final_after_one(self, parts3):
        q = Quench(parts3, QuenchProtocol.linear_ramp(1e-4))
        np.testing.assert_array_equal(hamiltonian_at(parts3, q.protocol, *JF, 1.0), q.h_final)

    def test_final_hamiltonian_of_power_law_is_static(self, parts3):
        q = Quench(parts3, QuenchProtocol.linear_then_powerlaw(1.0))
        np.testing.assert_array_equal(q.h_final, parts3.h_static)


class TestDeltaNorm:
    def test_ramp(self, parts3):
        ramp = QuenchProtocol.linear_ramp(1.0)
        assert delta_h_norm_at(parts3, ramp, JF, 1.0) == 0.0
        assert delta_h_norm_at(parts3, ramp, JF, 3.0) == 0.0
        assert delta_h_norm_at(parts3, ramp, JF, 0.0) == pytest.approx(DH_NORM_3, rel=1e-12)

    def test_power_law_decays_to_static(self, parts3):
        # H_inf = h_static here, so ||dH(2 t*)|| = 2**-p ||dH||.
        p = QuenchProtocol.linear_then_powerlaw(1.5, 3)
        assert delta_h_norm_at(parts3, p, JF, 3.0) == pytest.approx(DH_NORM_3 / 8, rel=1e-12)
        assert delta_h_norm_at(parts3, p, JF, 0.0) == 0.0

    def test_matches_direct_norm(self, parts3):
        p = QuenchProtocol.linear_then_powerlaw(1.0, 2.5)
        q = Quench(parts3, p)
        for t in (0.3, 1.0, 2.7, 40.0):
            direct = np.abs(np.linalg.eigvalsh(q.at(t) - q.h_final)).max()
            assert q.delta_norm(t) == pytest.approx(direct, rel=1e-10, abs=1e-14)

    def test_settle_time(self, parts3):
        q = Quench(parts3, QuenchProtocol.linear_then_powerlaw(2.0, 3))
        ts = q.settle_time(1e-6)
        assert q.delta_norm(ts) == pytest.approx(1e-6, rel=1e-9)
        assert Quench(parts3, QuenchProtocol.linear_ramp(5.0)).settle_time(1e-12) == 5.0
        assert Quench(parts3, QuenchProtocol.sudden()).settle_time(1e-12) == 0.0


class TestCertificates:
    def test_ramp_certificate(self, parts3):
        cert = decay_certificate(parts3, QuenchProtocol.linear_ramp(5.0), JF)
        assert (cert.K, cert.epsilon, cert.t_star) == (0.0, 1.0, 5.0)
        check = verify_certificate(cert, parts3, QuenchProtocol.linear_ramp(5.0), JF)
        assert check.all_passed and np.all(check.lhs == 0)

    def test_cubic_tail(self):
        parts = toy_parts(4.0)
        cert = decay_certificate(parts, QuenchProtocol.linear_then_powerlaw(2.0, 3), (1.0, 0.0))
        assert cert.K == pytest.approx(32.0)
        assert cert.epsilon == pytest.approx(1.0)

    def test_fractional_power(self):
        parts = toy_parts(1.0)
        proto = QuenchProtocol.linear_then_powerlaw(1.0, 2.5)
        cert = decay_certificate(parts, proto, (1.0, 0.0))
        assert (cert.K, cert.epsilon) == pytest.approx((1.0, 0.5))
        ts = np.geomspace(1, 100, 40)
        lhs = [delta_h_norm_at(parts, proto, (1.0, 0.0), t) for t in ts]
        np.testing.assert_allclose(lhs, cert.rhs(ts), rtol=1e-12)

    @pytest.mark.parametrize("p", [2.0, 1.5])
    def test_slow_tail_is_uncertifiable(self, parts3, p):
        with pytest.raises(UncertifiableProtocolError):
            decay_certificate(parts3, QuenchProtocol.linear_then_powerlaw(1.0, p), JF)

    def test_sudden_is_uncertifiable(self, parts3):
        with pytest.raises(UncertifiableProtocolError):
            decay_certificate(parts3, QuenchProtocol.sudden(), JF)

    def test_halved_constant_fails(self, parts3):
        proto = QuenchProtocol.linear_then_powerlaw(1.0, 3)
        cert = decay_certificate(parts3, proto, JF)
        assert verify_certificate(cert, parts3, proto, JF).worst_ratio <= 1 + 1e-12
        bad = verify_certificate(cert.scaled(0.5), parts3, proto, JF)
        assert not bad.all_passed
        assert bad.worst_ratio == pytest.approx(2.0)

    def test_too_few_samples(self, parts3):
        proto = QuenchProtocol.linear_ramp(1.0)
        with pytest.raises(InvalidArgumentError):
            verify_certificate(decay_certificate(parts3, proto, JF), parts3, proto, JF, samples=5)

    def test_invalid_certificate(self):
        with pytest.raises(InvalidArgumentError):
            DecayCertificate(-1.0, 1.0, 1.0)
        with pytest.raises(InvalidArgumentError):
            DecayCertificate(1.0, 0.0, 1.0)

    @settings(max_examples=25, deadline=None)
    @given(p=st.floats(2.0, 5.0, exclude_min=True).filter(lambda p: p > 2 + 1e-6),
           t_star=st.floats(0.1, 10.0))
    def test_emitted_certificates_verify(self, parts2, p, t_star):
        proto = QuenchProtocol.linear_then_powerlaw(t_star, p)
        cert = decay_certificate(parts2, proto, JF)
        assert verify_certificate(cert, parts2, proto, JF).all_passed
        assert cert.t_star == t_star and proto.kind is ProtocolKind.LINEAR_THEN_POWERLAW
