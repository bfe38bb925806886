"""Decode-probability checks, including the incomplete-gamma identity."""

import math

import numpy as np
import pytest
from scipy import integrate, special

from aoisched.channel import ChannelParams, success_prob, success_prob_table


def quadrature_upper_gamma(a: int, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by direct quadrature."""
    value, _ = integrate.quad(lambda t: t ** (a - 1) * math.exp(-t), x, np.inf)
    return value / math.gamma(a)


class TestSuccessProb:
    def test_nobody_active_is_zero(self):
        params = ChannelParams(antennas=4, snr=100.0, omega=0.04)
        assert success_prob(params, 0) == 0.0

    def test_full_load_is_single_exponential_term(self):
        """With all antennas used the sum collapses to exp(-x)."""
        for m_ant, snr, omega in [(1, 10.0, 0.04), (4, 100.0, 0.04), (7, 3.0, 0.2)]:
            params = ChannelParams(antennas=m_ant, snr=snr, omega=omega)
            assert success_prob(params, m_ant) == pytest.approx(
                math.exp(-params.load_factor), abs=1e-15
            )

    def test_reference_point_20db(self):
        """M=4, 20 dB, omega=0.04: full load gives exp(-1/4) = 0.778801."""
        params = ChannelParams(antennas=4, snr=100.0, omega=0.04, gamma_th=1.0)
        value = success_prob(params, 4)
        assert value == pytest.approx(0.7788007830714049, abs=1e-12)
        assert value == pytest.approx(quadrature_upper_gamma(1, 0.25), abs=1e-10)

    def test_matches_regularized_gamma_on_grid(self):
        """p(K) = Q(M - K + 1, x), checked against quadrature to 1e-10."""
        for m_ant in (1, 2, 4, 8, 16):
            for x_target in (0.05, 0.25, 1.0, 3.0):
                params = ChannelParams(
                    antennas=m_ant, snr=1.0 / x_target, omega=1.0, gamma_th=1.0
                )
                for active in range(1, m_ant + 1):
                    got = success_prob(params, active)
                    a = m_ant - active + 1
                    assert got == pytest.approx(
                        quadrature_upper_gamma(a, x_target), abs=1e-10
                    )
                    assert got == pytest.approx(
                        float(special.gammaincc(a, x_target)), abs=1e-12
                    )

    def test_strictly_decreasing_in_active_count(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            params = ChannelParams(
                antennas=int(rng.integers(2, 12)),
                snr=float(rng.uniform(0.5, 500.0)),
                omega=float(rng.uniform(0.01, 1.0)),
                gamma_th=float(rng.uniform(0.2, 3.0)),
            )
            table = success_prob_table(params)
            assert np.all(np.diff(table[1:]) < 0)

    def test_high_snr_limit_is_one(self):
        params = ChannelParams(antennas=5, snr=1e12, omega=0.04)
        for active in range(1, 6):
            assert success_prob(params, active) == pytest.approx(1.0, abs=1e-9)

    def test_results_are_probabilities(self):
        params = ChannelParams(antennas=64, snr=0.3, omega=0.02, gamma_th=2.5)
        table = success_prob_table(params)
        assert np.all(table >= 0.0) and np.all(table <= 1.0)

    def test_rejects_more_active_than_antennas(self):
        params = ChannelParams(antennas=3, snr=10.0, omega=0.04)
        with pytest.raises(ValueError, match="active_count"):
            success_prob(params, 4)
        with pytest.raises(ValueError):
            success_prob(params, -1)


class TestChannelParams:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            ChannelParams(antennas=0, snr=10.0, omega=0.04)
        with pytest.raises(ValueError):
            ChannelParams(antennas=65, snr=10.0, omega=0.04)
        with pytest.raises(ValueError):
            ChannelParams(antennas=2, snr=-1.0, omega=0.04)
        with pytest.raises(ValueError):
            ChannelParams(antennas=2, snr=10.0, omega=0.0)
        with pytest.raises(ValueError):
            ChannelParams(antennas=2, snr=10.0, omega=0.04, gamma_th=0.0)

    def test_load_factor(self):
        params = ChannelParams(antennas=4, snr=100.0, omega=0.04, gamma_th=1.0)
        assert params.load_factor == pytest.approx(0.25)
