"""Transmission success probability of the multi-antenna uplink.

The only channel abstraction in the whole toolkit: when ``c`` devices
transmit concurrently to a base station with ``antennas`` receive antennas
and zero-forcing separation, each of them is decoded correctly with
probability

    p(c) = sum_{j=0}^{antennas - c} x^j / j! * exp(-x),

where ``x = gamma_th / (snr * omega)`` is the inverse of the mean
post-processing SNR per stream.  ``p(0)`` is defined as 0 (nobody
transmits, nothing is received).  Fading realizations, pilots and decoding
itself are deliberately out of scope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_ANTENNAS = 64


@dataclass(frozen=True)
class ChannelParams:
    """Static parameters of the shared uplink channel.

    antennas: number of BS antennas M (spatial degrees of freedom), 1..64.
    snr: transmit power over noise power, linear scale (not dB).
    omega: aggregate path gain, distance**(-path_loss_exponent).
    gamma_th: post-processing SNR threshold for correct decoding.
    """

    antennas: int
    snr: float
    omega: float
    gamma_th: float = 1.0

    def __post_init__(self) -> None:
        if not (1 <= self.antennas <= MAX_ANTENNAS):
            raise ValueError(f"antennas must be in 1..{MAX_ANTENNAS}, got {self.antennas}")
        if not (self.snr > 0 and math.isfinite(self.snr)):
            raise ValueError(f"snr must be positive and finite, got {self.snr}")
        if not (self.omega > 0 and math.isfinite(self.omega)):
            raise ValueError(f"omega must be positive and finite, got {self.omega}")
        if not (self.gamma_th > 0 and math.isfinite(self.gamma_th)):
            raise ValueError(f"gamma_th must be positive and finite, got {self.gamma_th}")

    @property
    def load_factor(self) -> float:
        """x = gamma_th / (snr * omega); the decode threshold in noise units."""
        x = self.gamma_th / (self.snr * self.omega)
        if not (x > 0 and math.isfinite(x)):
            raise ValueError(f"load factor must be positive and finite, got {x}")
        return x


def success_prob(params: ChannelParams, active_count: int) -> float:
    """Per-device decode probability when ``active_count`` devices transmit.

    Returns 0 for active_count == 0.  Raises ValueError if more devices are
    active than there are spatial degrees of freedom.
    """
    m_antennas = params.antennas
    if not 0 <= active_count <= m_antennas:
        raise ValueError(
            f"active_count must be in 0..{m_antennas} (antenna count), got {active_count}"
        )
    if active_count == 0:
        return 0.0
    x = params.load_factor
    # Partial exponential sum with running-product terms: term_j = x^j / j!.
    # Avoids explicit factorials so large antenna counts cannot overflow.
    term = 1.0
    total = 1.0
    for j in range(1, m_antennas - active_count + 1):
        term *= x / j
        total += term
    return min(1.0, total * math.exp(-x))


def success_prob_table(params: ChannelParams) -> np.ndarray:
    """Vector [p(0), p(1), ..., p(M)] for fast lookups in simulation loops."""
    return np.array(
        [success_prob(params, c) for c in range(params.antennas + 1)], dtype=np.float64
    )
