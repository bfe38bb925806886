"""Compact belief tracking for a single device's hidden local age.

The base station never sees a device's local age directly unless a
transmission succeeds, yet the full posterior over the local age is always
determined by three integers:

    k  last local age the BS actually observed,
    m  slots elapsed since that observation while the device went
       unscheduled (or, after an empty-buffer probe, since the probe),
    u  slots elapsed since a failed transmission with no success yet
       (0 when no failure is pending).

The implied destination AoI is ``k + m + u``.  This module holds the
triple, the closed-form probability vector it stands for, the observation
kinds the BS can receive, and the one-slot evolution of the triple under
each observation.  Scheduling code never materializes the probability
vector; it uses the closed forms ``active_probability`` and
``expected_age_gap`` so no truncation error enters any policy decision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NOT_SCHEDULED = "not_scheduled"
FAILED = "failed"
EMPTY_BUFFER = "empty_buffer"
SUCCESS = "success"


@dataclass(frozen=True)
class Observation:
    """One slot's feedback about a single device.

    kind is one of NOT_SCHEDULED, FAILED, EMPTY_BUFFER, SUCCESS; SUCCESS
    carries the local age d the BS decoded.
    """

    kind: str
    d: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in (NOT_SCHEDULED, FAILED, EMPTY_BUFFER, SUCCESS):
            raise ValueError(f"unknown observation kind {self.kind!r}")
        if self.kind == SUCCESS:
            if self.d is None or self.d < 1:
                raise ValueError(f"success must carry an observed local age >= 1, got {self.d}")
        elif self.d is not None:
            raise ValueError(f"{self.kind} carries no local age")

    @classmethod
    def not_scheduled(cls) -> "Observation":
        return cls(NOT_SCHEDULED)

    @classmethod
    def failed(cls) -> "Observation":
        return cls(FAILED)

    @classmethod
    def empty_buffer(cls) -> "Observation":
        return cls(EMPTY_BUFFER)

    @classmethod
    def success(cls, d: int) -> "Observation":
        return cls(SUCCESS, d)


@dataclass(frozen=True)
class BeliefTriple:
    """Three-integer summary (k, m, u) of one device's local-age posterior.

    lam is the device's packet arrival probability per slot.
    """

    k: int
    m: int
    u: int
    lam: float

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.u < 0:
            raise ValueError(f"u must be >= 0, got {self.u}")
        if not (0.0 < self.lam <= 1.0):
            raise ValueError(f"arrival rate must be in (0, 1], got {self.lam}")

    @property
    def aoi(self) -> int:
        """Destination AoI implied by the triple: D = k + m + u."""
        return self.k + self.m + self.u

    @classmethod
    def initial(cls, lam: float) -> "BeliefTriple":
        """Belief in the first slot: one slot elapsed on a known-fresh state."""
        return cls(k=1, m=1, u=0, lam=lam)


def support_max(b: BeliefTriple) -> int:
    """Largest local age with positive posterior probability."""
    return b.k + b.m if b.u == 0 else b.u + b.m


def belief_pmf(b: BeliefTriple, max_support: int) -> np.ndarray:
    """Posterior over the local age as a vector indexed by d = 1..max_support.

    For u == 0 the mass is geometric on 1..m (an arrival happened in one of
    the last m slots) plus a spike of gamma^m at d = k + m (no arrival at
    all, so the local age kept growing from the observed k).  For u > 0 the
    spike is gone -- a failed transmission proved the buffer nonempty -- and
    the geometric tail is renormalized over the m slots preceding the
    failure.  Entry j of the returned vector is the probability of local
    age j + 1.
    """
    needed = support_max(b)
    if max_support < needed:
        raise ValueError(f"max_support {max_support} < largest support point {needed}")
    lam = b.lam
    gamma = 1.0 - lam
    vec = np.zeros(max_support, dtype=np.float64)
    if b.u == 0:
        vec[: b.m] = lam * gamma ** np.arange(b.m)
        vec[b.k + b.m - 1] += gamma**b.m
    else:
        vec[: b.u] = lam * gamma ** np.arange(b.u)
        scale = 1.0 - gamma**b.m
        vec[b.u : b.u + b.m] = lam * gamma ** np.arange(b.u, b.u + b.m) / scale
    return vec


def active_probability(b: BeliefTriple) -> float:
    """Probability that the device holds an undelivered update (d < D).

    For u == 0 this is one minus the gamma^m spike at d = D; a pending
    failure (u > 0) certifies the buffer nonempty, so the probability is
    exactly 1.
    """
    if b.u > 0:
        return 1.0
    return 1.0 - (1.0 - b.lam) ** b.m


def expected_age_gap(b: BeliefTriple) -> float:
    """Expected destination-AoI reduction a successful delivery would bring.

    G = D - E[d | belief], always positive.  Closed forms follow from the
    pmf above.
    """
    lam = b.lam
    gamma = 1.0 - lam
    if b.u == 0:
        return b.m + (1.0 - gamma**b.m) * (b.k - 1.0 / lam)
    return b.aoi - 1.0 / lam + b.m * gamma ** (b.m + b.u) / (1.0 - gamma**b.m)


def phi_array(m: np.ndarray, u: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Vectorized active_probability over (k, m, u) component arrays."""
    gamma_m = (1.0 - lam) ** m
    return np.where(u > 0, 1.0, 1.0 - gamma_m)


def age_gap_array(
    k: np.ndarray, m: np.ndarray, u: np.ndarray, lam: np.ndarray
) -> np.ndarray:
    """Vectorized expected_age_gap over (k, m, u) component arrays."""
    gamma = 1.0 - lam
    gamma_m = gamma**m
    no_failure = m + (1.0 - gamma_m) * (k - 1.0 / lam)
    # gamma_m < 1 always (m >= 1, lam > 0), so the ratio is safe.
    pending = k + m + u - 1.0 / lam + m * gamma ** (m + u) / (1.0 - gamma_m)
    return np.where(u > 0, pending, no_failure)


def evolve(b: BeliefTriple, obs: Observation) -> BeliefTriple:
    """One-slot update of the triple given the slot's observation.

    EMPTY_BUFFER is rejected when u > 0: a pending failure proves the
    device active, so the BS can never find its buffer empty.
    """
    if obs.kind == SUCCESS:
        d = obs.d
        assert d is not None
        if b.u == 0:
            valid = d <= b.m or d == b.k + b.m
        else:
            valid = d <= b.u + b.m
        if not valid:
            raise ValueError(f"observed age {d} outside the support of {b}")
        return BeliefTriple(k=d, m=1, u=0, lam=b.lam)
    if obs.kind == EMPTY_BUFFER:
        if b.u > 0:
            raise ValueError("empty buffer observed while a failed transmission is pending")
        # The probe revealed d = D = k + m, which counts as an observation.
        return BeliefTriple(k=b.k + b.m, m=1, u=0, lam=b.lam)
    if obs.kind == FAILED:
        return BeliefTriple(k=b.k, m=b.m, u=b.u + 1, lam=b.lam)
    # Not scheduled.
    if b.u > 0:
        return BeliefTriple(k=b.k, m=b.m, u=b.u + 1, lam=b.lam)
    return BeliefTriple(k=b.k, m=b.m + 1, u=b.u, lam=b.lam)
