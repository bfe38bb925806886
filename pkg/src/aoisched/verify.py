"""Empirical validation of the belief model against raw simulation.

Two samplers produce conditioned histograms of the hidden local age:

* ``empirical_belief`` runs full network simulations under the uniform
  random policy and keeps the runs whose end-of-run observation summary
  (k, m, u) matches a target for every constrained device.  Exact and
  simple, but only practical when the target summary is likely.

* ``conditioned_belief`` replays a fixed observation history (a
  ConditionPlan): the schedule is pinned, success observations pin the
  local age outright (the observation reveals it; the local-age process
  is Markov, so substituting the observed value is exact conditioning),
  failed and empty-buffer slots become rejection events on the raw
  buffer state, and decode outcomes never need sampling because every
  plan pins the active count wherever a conditioned decode happens.
  This makes deep or joint summaries affordable: the acceptance rate is
  a product of a few buffer-state probabilities instead of the
  vanishing probability of hitting the summary by chance.

Both samplers draw the hidden process raw -- no belief formula enters
the simulation -- so comparing their histograms against the closed-form
belief vectors is a genuine check of the model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .belief import BeliefTriple, Observation, evolve
from .simcore import NetworkConfig, _simulate_batch
from .policy import PolicySpec

OFF = "off"
FREE = "free"
FAIL = "fail"
EMPTY = "empty"
SUCCESS = "success"


class InsufficientMatchesError(RuntimeError):
    """Too few simulated runs matched the conditioning target."""

    def __init__(self, matched: int, needed: int, simulated: int):
        super().__init__(
            f"only {matched} of the needed {needed} matches after {simulated} runs"
        )
        self.matched = matched
        self.needed = needed
        self.simulated = simulated


@dataclass(frozen=True)
class SlotCondition:
    """What one device does in one slot of a conditioning plan.

    off: not scheduled.  free: scheduled, outcome unconstrained (only
    allowed for unconstrained devices).  fail: scheduled, must be active
    and fail.  empty: scheduled, buffer must be empty.  success:
    scheduled, transmission succeeds and the BS observes local age
    ``observed``.
    """

    kind: str
    observed: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in (OFF, FREE, FAIL, EMPTY, SUCCESS):
            raise ValueError(f"unknown slot condition {self.kind!r}")
        if (self.kind == SUCCESS) != (self.observed is not None):
            raise ValueError("exactly the success condition carries an observed age")


@dataclass(frozen=True)
class ConditionPlan:
    """A fixed schedule plus per-slot observation requirements.

    slots[t][i] is device i's condition in slot t; targets[i] is the
    (k, m, u) summary device i must reach by the end (None for
    unconstrained devices).  Constructing the plan replays the belief
    evolution symbolically, which both checks that the prescribed
    history is feasible and pins down the summaries it produces.
    """

    lambdas: tuple[float, ...]
    max_scheduled: int
    slots: tuple[tuple[SlotCondition, ...], ...]
    targets: tuple[tuple[int, int, int] | None, ...] = field(default=())

    def __post_init__(self) -> None:
        n = len(self.lambdas)
        if not self.slots:
            raise ValueError("a plan needs at least one slot")
        finals: list[tuple[int, int, int] | None] = []
        for i in range(n):
            if any(len(slot) != n for slot in self.slots):
                raise ValueError("every slot must condition every device")
            kinds = [slot[i].kind for slot in self.slots]
            if FREE in kinds:
                finals.append(None)
                continue
            belief = BeliefTriple.initial(self.lambdas[i])
            for slot in self.slots:
                belief = evolve(belief, _condition_to_observation(slot[i]))
            finals.append((belief.k, belief.m, belief.u))
        if self.targets == ():
            object.__setattr__(self, "targets", tuple(finals))
        else:
            for i, (final, target) in enumerate(zip(finals, self.targets)):
                if target is not None and final != target:
                    raise ValueError(
                        f"device {i + 1} reaches summary {final}, not the target {target}"
                    )
        for t, slot in enumerate(self.slots):
            scheduled = [c.kind for c in slot if c.kind != OFF]
            if not 1 <= len(scheduled) <= self.max_scheduled:
                raise ValueError(
                    f"slot {t + 1} schedules {len(scheduled)} devices, "
                    f"allowed 1..{self.max_scheduled}"
                )
            if FREE in scheduled and len(set(scheduled)) > 1:
                raise ValueError(
                    f"slot {t + 1} mixes a free device with conditioned ones, which "
                    "would leave its decode probability unpinned"
                )

    @property
    def horizon(self) -> int:
        return len(self.slots)


def _condition_to_observation(cond: SlotCondition) -> Observation:
    if cond.kind in (OFF, FREE):
        return Observation.not_scheduled()
    if cond.kind == FAIL:
        return Observation.failed()
    if cond.kind == EMPTY:
        return Observation.empty_buffer()
    assert cond.observed is not None
    return Observation.success(cond.observed)


@dataclass
class EmpiricalBelief:
    """Conditioned histograms of the hidden local ages.

    marginals[i] is None for unconstrained devices, else the empirical
    pmf of device i's final local age (index j = age j + 1).  joint maps
    final age tuples over the constrained devices to their frequency.
    """

    matched: int
    simulated: int
    targets: tuple[tuple[int, int, int] | None, ...]
    marginals: list[np.ndarray | None]
    joint: dict[tuple[int, ...], float]

    @property
    def constrained(self) -> list[int]:
        """1-based indices of the devices the conditioning pinned."""
        return [i + 1 for i, t in enumerate(self.targets) if t is not None]


def independence_check(
    result: EmpiricalBelief, points: list[tuple[int, ...]]
) -> float:
    """Largest |joint - product of marginals| over the given age tuples."""
    worst = 0.0
    idx = [i - 1 for i in result.constrained]
    for point in points:
        if len(point) != len(idx):
            raise ValueError(f"point {point} must give one age per constrained device")
        prod = 1.0
        for pos, d in zip(idx, point):
            marg = result.marginals[pos]
            assert marg is not None
            prod *= marg[d - 1] if d - 1 < len(marg) else 0.0
        worst = max(worst, abs(result.joint.get(tuple(point), 0.0) - prod))
    return worst


def _histograms(
    rows: np.ndarray, targets, counts: dict[tuple[int, ...], int]
) -> None:
    for row, cnt in zip(*np.unique(rows, axis=0, return_counts=True)):
        key = tuple(int(x) for x in row)
        counts[key] = counts.get(key, 0) + int(cnt)


def _finish(
    n_devices: int,
    targets,
    joint_counts: dict[tuple[int, ...], int],
    matched: int,
    simulated: int,
) -> EmpiricalBelief:
    constrained = [i for i, t in enumerate(targets) if t is not None]
    max_age = max((max(key) for key in joint_counts), default=1)
    marginals: list[np.ndarray | None] = [None] * n_devices
    for pos, dev in enumerate(constrained):
        hist = np.zeros(max_age)
        for key, cnt in joint_counts.items():
            hist[key[pos] - 1] += cnt
        marginals[dev] = hist / matched
    joint = {key: cnt / matched for key, cnt in joint_counts.items()}
    return EmpiricalBelief(
        matched=matched,
        simulated=simulated,
        targets=tuple(targets),
        marginals=marginals,
        joint=joint,
    )


def empirical_belief(
    config: NetworkConfig,
    targets: list[tuple[int, int, int] | None],
    samples: int,
    max_sim_runs: int = 20_000_000,
    min_matches: int | None = None,
    batch_runs: int = 100_000,
) -> EmpiricalBelief:
    """Rejection sampling on the end-of-run summary under the random policy.

    Simulates batches of config.horizon-slot runs, keeps those whose
    final per-device (k, m, u) matches every non-None target, and
    histograms the matching runs' hidden local ages.  Raises
    InsufficientMatchesError when the run budget is exhausted before
    min_matches (default: samples) matches accumulate.
    """
    if all(t is None for t in targets):
        raise ValueError("at least one device needs a target summary")
    if len(targets) != config.n_devices:
        raise ValueError("one target entry (or None) per device")
    min_matches = samples if min_matches is None else min_matches
    spec = PolicySpec(kind="random")
    root = np.random.SeedSequence(config.seed)
    constrained = [i for i, t in enumerate(targets) if t is not None]
    joint_counts: dict[tuple[int, ...], int] = {}
    matched = 0
    simulated = 0
    while matched < samples and simulated < max_sim_runs:
        batch = min(batch_runs, max_sim_runs - simulated)
        seeds = root.spawn(batch)
        _, _, final = _simulate_batch(
            config, spec, seeds, collect_final_state=True
        )
        k, m, u, d = final
        mask = np.ones(batch, dtype=bool)
        for i in constrained:
            tk, tm, tu = targets[i]  # type: ignore[misc]
            mask &= (k[:, i] == tk) & (m[:, i] == tm) & (u[:, i] == tu)
        rows = d[mask][:, constrained]
        if len(rows):
            _histograms(rows, targets, joint_counts)
            matched += len(rows)
        simulated += batch
    if matched < min_matches:
        raise InsufficientMatchesError(matched, min_matches, simulated)
    return _finish(config.n_devices, targets, joint_counts, matched, simulated)


def conditioned_belief(
    plan: ConditionPlan,
    samples: int,
    seed: int = 0,
    batch_runs: int = 200_000,
    max_sim_runs: int = 200_000_000,
) -> EmpiricalBelief:
    """Sample the hidden ages of a fixed observation history exactly.

    Rows are rejected when a fail slot finds the device's buffer empty or
    an empty slot finds it full; success slots substitute the observed
    age (exact conditioning, see the module docstring).  Everything else
    is raw arrival dynamics.
    """
    n = len(plan.lambdas)
    lam = np.asarray(plan.lambdas)
    targets = plan.targets
    constrained = [i for i, t in enumerate(targets) if t is not None]
    if not constrained:
        raise ValueError("the plan constrains no device")
    root = np.random.SeedSequence(seed)
    joint_counts: dict[tuple[int, ...], int] = {}
    matched = 0
    simulated = 0
    while matched < samples and simulated < max_sim_runs:
        batch = min(batch_runs, max_sim_runs - simulated)
        rng = np.random.Generator(np.random.Philox(root.spawn(1)[0]))
        d = np.where(rng.random((batch, n)) < lam, 1, 2).astype(np.int64)
        aoi = np.full((batch, n), 2, dtype=np.int64)
        alive = np.ones(batch, dtype=bool)
        for slot in plan.slots:
            for i, cond in enumerate(slot):
                if cond.kind == FAIL:
                    alive &= d[:, i] < aoi[:, i]
                elif cond.kind == EMPTY:
                    alive &= d[:, i] == aoi[:, i]
                elif cond.kind == SUCCESS:
                    d[:, i] = cond.observed
            succ = np.array([c.kind == SUCCESS for c in slot])
            aoi = np.where(succ, d + 1, aoi + 1)
            d = np.where(rng.random((batch, n)) < lam, 1, d + 1)
        rows = d[alive][:, constrained]
        if len(rows):
            _histograms(rows, targets, joint_counts)
            matched += len(rows)
        simulated += batch
    if matched < samples:
        raise InsufficientMatchesError(matched, samples, simulated)
    return _finish(n, targets, joint_counts, matched, simulated)


def single_device_plan(
    k: int, m: int, u: int, lam: float, partner_lam: float = 0.5
) -> ConditionPlan:
    """Canonical two-device history leaving device 1 with summary (k, m, u).

    Device 1 idles k-1 slots (so an age of k is reachable), is observed
    at age k, idles m-1 further slots, then (for u >= 1) fails once and
    idles u-1 more slots.  Device 2 exists only to keep every slot's
    schedule nonempty and is never co-scheduled with device 1.
    """
    if k < 1 or m < 1 or u < 0:
        raise ValueError("need k >= 1, m >= 1, u >= 0")
    off_free = (SlotCondition(OFF), SlotCondition(FREE))
    on_off = lambda c: (c, SlotCondition(OFF))  # noqa: E731
    slots: list[tuple[SlotCondition, SlotCondition]] = []
    slots += [off_free] * (k - 1)
    slots.append(on_off(SlotCondition(SUCCESS, observed=k)))
    slots += [off_free] * (m - 1)
    if u >= 1:
        slots.append(on_off(SlotCondition(FAIL)))
        slots += [off_free] * (u - 1)
    return ConditionPlan(
        lambdas=(lam, partner_lam),
        max_scheduled=1,
        slots=tuple(slots),
        targets=((k, m, u), None),
    )


def independence_plan(
    lambdas: tuple[float, float, float] = (0.5, 0.6, 0.3),
) -> ConditionPlan:
    """Three-device, two-antenna plan pinning all three summaries at once.

    Five slots leave the devices at summaries (1, 1, 3), (2, 2, 3) and
    (3, 2, 2); the joint hidden-age histogram under this plan is the
    testbed for the factorization of the posterior across devices.
    """
    o = SlotCondition(OFF)
    f = SlotCondition(FAIL)
    e = SlotCondition(EMPTY)

    def s(age: int) -> SlotCondition:
        return SlotCondition(SUCCESS, observed=age)

    slots = (
        (o, e, e),
        (s(1), o, e),
        (f, f, o),
        (o, o, f),
        (f, o, o),
    )
    return ConditionPlan(
        lambdas=lambdas,
        max_scheduled=2,
        slots=slots,
        targets=((1, 1, 3), (2, 2, 3), (3, 2, 2)),
    )
