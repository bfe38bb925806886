"""One-slot Lyapunov drift of a candidate schedule.

The scheduler scores a candidate set of devices by the expected one-slot
growth of the weighted-AoI Lyapunov function L = (1/N) sum_i beta_i * D_i
given every device's belief triple.  A scheduled device contributes an
expected AoI reduction equal to its success probability conditioned on
being active (which depends on how many co-scheduled devices turn out to
be active) times its expected age gap G.  The conditioning is evaluated
exactly by enumerating the 2^(K-1) activity patterns of the co-scheduled
devices, which is affordable for the antenna counts this toolkit targets.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .belief import BeliefTriple, active_probability, expected_age_gap
from .channel import ChannelParams, success_prob_table

# Exact pattern enumeration is 2^(K-1); refuse silly antenna counts.
MAX_EXACT_DRIFT_ANTENNAS = 20


@dataclass(frozen=True)
class DriftWeights:
    """Per-device positive weights beta_i of the Lyapunov function."""

    beta: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.beta) == 0:
            raise ValueError("weights must be nonempty")
        if any(not b > 0 for b in self.beta):
            raise ValueError("all weights must be positive")

    @classmethod
    def ones(cls, n: int) -> "DriftWeights":
        return cls(beta=(1.0,) * n)

    @classmethod
    def from_array(cls, beta: Sequence[float]) -> "DriftWeights":
        return cls(beta=tuple(float(b) for b in beta))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.beta, dtype=np.float64)


@dataclass(frozen=True)
class ActionSet:
    """A scheduled subset of devices, held as sorted 1-based indices."""

    devices: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "devices", tuple(int(d) for d in self.devices))
        if len(self.devices) == 0:
            raise ValueError("an action schedules at least one device")
        if any(d < 1 for d in self.devices):
            raise ValueError(f"device indices are 1-based, got {self.devices}")
        if tuple(sorted(set(self.devices))) != self.devices:
            raise ValueError(f"devices must be sorted and distinct, got {self.devices}")

    @classmethod
    def of(cls, *devices: int) -> "ActionSet":
        return cls(tuple(sorted(set(devices))))

    def __len__(self) -> int:
        return len(self.devices)

    def __contains__(self, device: int) -> bool:
        return device in self.devices


def enumerate_actions(n_devices: int, max_size: int, order: str = "cardinality") -> list[ActionSet]:
    """All nonempty device subsets of size <= max_size.

    order="cardinality": increasing subset size, lexicographic within one
    size -- the canonical indexing of randomized-schedule distributions.
    order="lex": plain lexicographic order of the index sequences -- the
    tie-breaking order of the schedulers.
    """
    if not 1 <= max_size <= n_devices:
        raise ValueError(f"need 1 <= max_size <= n_devices, got {max_size}, {n_devices}")
    actions = [
        ActionSet(devs)
        for size in range(1, max_size + 1)
        for devs in itertools.combinations(range(1, n_devices + 1), size)
    ]
    if order == "cardinality":
        return actions
    if order == "lex":
        return sorted(actions, key=lambda a: a.devices)
    raise ValueError(f"unknown order {order!r}")


def num_actions(n_devices: int, max_size: int) -> int:
    """Size of the feasible action space, sum_{K=1..max_size} C(N, K)."""
    import math

    return sum(math.comb(n_devices, size) for size in range(1, max_size + 1))


def activity_patterns(phis: Sequence[float]):
    """All on/off activity patterns of the given devices.

    Yields (active_count, probability) for each of the 2^len(phis)
    patterns; the probabilities are the product distribution of the
    devices' independent active probabilities and sum to one.
    """
    for pattern in itertools.product((0, 1), repeat=len(phis)):
        q = 1.0
        for z, phi in zip(pattern, phis):
            q *= phi if z else 1.0 - phi
        yield sum(pattern), q


def conditional_success_prob(
    target: int,
    action: ActionSet,
    phis: Sequence[float],
    channel: ChannelParams,
) -> float:
    """Success probability of ``target`` given that it is active.

    Averages the per-device decode probability p(active count) over the
    2^(K-1) on/off activity patterns of the other scheduled devices,
    weighting each pattern by its product probability under the devices'
    active probabilities.
    """
    if target not in action:
        raise ValueError(f"target {target} not in action {action.devices}")
    if len(action) > channel.antennas:
        raise ValueError(f"action of size {len(action)} exceeds {channel.antennas} antennas")
    if channel.antennas > MAX_EXACT_DRIFT_ANTENNAS:
        raise ValueError(
            f"exact drift supports at most {MAX_EXACT_DRIFT_ANTENNAS} antennas, "
            f"got {channel.antennas}"
        )
    p_table = success_prob_table(channel)
    others = [phis[i - 1] for i in action.devices if i != target]
    return sum(p_table[count + 1] * q for count, q in activity_patterns(others))


def lyapunov_drift(
    action: ActionSet,
    beliefs: Sequence[BeliefTriple],
    weights: DriftWeights,
    channel: ChannelParams,
) -> float:
    """Expected one-slot growth of the weighted-AoI Lyapunov function.

    (1/N) [ sum_i beta_i  -  sum_{i in action} beta_i * csp_i * G_i ],
    where csp_i is the success probability of i conditioned on i being
    active.  Unscheduled devices contribute no reduction term.
    """
    n = len(beliefs)
    beta = weights.as_array()
    if len(beta) != n:
        raise ValueError(f"{len(beta)} weights for {n} devices")
    if any(d > n for d in action.devices):
        raise ValueError(f"action {action.devices} references devices beyond {n}")
    if len(action) > channel.antennas:
        raise ValueError(f"action of size {len(action)} exceeds {channel.antennas} antennas")
    phis = [active_probability(b) for b in beliefs]
    reduction = 0.0
    for i in action.devices:
        csp = conditional_success_prob(i, action, phis, channel)
        reduction -= beta[i - 1] * csp * expected_age_gap(beliefs[i - 1])
    return (reduction + beta.sum()) / n
