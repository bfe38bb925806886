"""Ground-truth slotted simulation of the status-update network.

Each slot proceeds in a fixed order: the weighted AoI reward is sampled
first (so slot t is scored before that slot's transmissions can land),
the policy picks a schedule from the belief snapshot, the scheduled
devices with nonempty buffers transmit and succeed independently with
probability p(active count), the base station's observations update the
beliefs and the AoI recursion, and finally fresh packets arrive at the
devices.  The initial state is one elapsed slot on a known-fresh network:
the first slot's local age has already seen one arrival draw, the AoI is
2 everywhere, and every belief is the (1, 1, 0) triple.

Randomness comes from one counter-based generator per run (Philox keyed
by a SeedSequence child of the configured seed, child r for run r), read
through a fixed chunked tape layout: a single pre-step arrival vector,
then per chunk of slots a block of policy uniforms, a block of decode
uniforms, and a block of arrival uniforms.  Runs are therefore
reproducible bit-for-bit no matter how they are batched or distributed.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .belief import BeliefTriple, Observation, evolve
from .channel import ChannelParams, success_prob_table
from .drift import ActionSet
from .policy import BatchedScheduler, PolicySpec

TAPE_CHUNK = 2048


@dataclass(frozen=True)
class NetworkConfig:
    """Static description of one network instance plus experiment size."""

    n_devices: int
    channel: ChannelParams
    lambdas: tuple[float, ...]
    omegas: tuple[float, ...]
    horizon: int
    runs: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_devices < self.channel.antennas:
            raise ValueError(
                f"{self.n_devices} devices with {self.channel.antennas} antennas; "
                "need at least as many devices as antennas"
            )
        if len(self.lambdas) != self.n_devices or len(self.omegas) != self.n_devices:
            raise ValueError("lambdas and omegas must have one entry per device")
        if any(not 0.0 < lam <= 1.0 for lam in self.lambdas):
            raise ValueError("arrival rates must be in (0, 1]")
        if any(not w > 0 for w in self.omegas):
            raise ValueError("weights must be positive")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")

    @classmethod
    def create(
        cls,
        n_devices: int,
        channel: ChannelParams,
        lambdas: float | Sequence[float],
        omegas: float | Sequence[float],
        horizon: int,
        runs: int = 1,
        seed: int = 0,
    ) -> "NetworkConfig":
        """Convenience constructor broadcasting scalar rates/weights."""
        if isinstance(lambdas, (int, float)):
            lambdas = (float(lambdas),) * n_devices
        if isinstance(omegas, (int, float)):
            omegas = (float(omegas),) * n_devices
        return cls(
            n_devices=n_devices,
            channel=channel,
            lambdas=tuple(float(x) for x in lambdas),
            omegas=tuple(float(x) for x in omegas),
            horizon=horizon,
            runs=runs,
            seed=seed,
        )


@dataclass(frozen=True)
class DeviceTruth:
    """Hidden ground truth of one device: local age and destination AoI."""

    d: int
    aoi: int

    def __post_init__(self) -> None:
        if not 1 <= self.d <= self.aoi:
            raise ValueError(f"need 1 <= d <= aoi, got d={self.d}, aoi={self.aoi}")

    @property
    def has_packet(self) -> bool:
        """Buffer indicator: an undelivered update exists iff aoi > d."""
        return self.aoi > self.d


@dataclass
class RunResult:
    """Realized statistics of a single simulation run."""

    ewsaoi: float
    per_device_mean_aoi: np.ndarray
    throughput: np.ndarray
    aoi_timeseries: np.ndarray | None = None


@dataclass
class MonteCarloResult:
    """EWSAoI aggregated over independent runs."""

    mean: float
    stderr: float
    per_run: np.ndarray

    @property
    def runs(self) -> int:
        return len(self.per_run)


@dataclass
class SlotStats:
    """Optional per-run diagnostic accumulators (theory cross-checks)."""

    active_slots: np.ndarray  # (runs, M+1) slots with a given active count
    successes: np.ndarray  # (runs, M+1) per-device successes by active count
    scheduled_active: np.ndarray  # (runs, M+1) scheduled-device activations by count
    spike_events: np.ndarray  # (runs,) no-failure devices found with d == AoI
    spike_predicted: np.ndarray  # (runs,) summed gamma^m predictions for those
    spike_slots: np.ndarray  # (runs,) number of no-failure device-slots


class _RunTape:
    """Chunked random stream of one run; see the module docstring."""

    def __init__(self, seed_seq: np.random.SeedSequence, n_devices: int, chunk: int = TAPE_CHUNK):
        self._gen = np.random.Generator(np.random.Philox(seed_seq))
        self._n = n_devices
        self.chunk = chunk

    def arrival_pre(self) -> np.ndarray:
        return self._gen.random(self._n)

    def next_chunk(self, slots: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        policy_u = self._gen.random(slots)
        decode_u = self._gen.random((slots, self._n))
        arrival_u = self._gen.random((slots, self._n))
        return policy_u, decode_u, arrival_u


def run_seed_sequences(config: NetworkConfig) -> list[np.random.SeedSequence]:
    """Independent per-run seeds: child r of SeedSequence(config.seed)."""
    return np.random.SeedSequence(config.seed).spawn(config.runs)


def _simulate_batch(
    config: NetworkConfig,
    spec: PolicySpec,
    seed_seqs: Sequence[np.random.SeedSequence],
    collect_timeseries: bool = False,
    collect_stats: bool = False,
    collect_final_state: bool = False,
) -> tuple[list[RunResult], SlotStats | None, tuple[np.ndarray, ...] | None]:
    n = config.n_devices
    t_total = config.horizon
    m_ant = config.channel.antennas
    lam = np.asarray(config.lambdas)
    omega = np.asarray(config.omegas)
    p_table = success_prob_table(config.channel)
    scheduler = BatchedScheduler(spec, config.channel, n, omega)
    r = len(seed_seqs)
    tapes = [_RunTape(ss, n) for ss in seed_seqs]

    # Initial state: one arrival draw on a fresh network.
    pre = np.stack([tape.arrival_pre() for tape in tapes])
    d = np.where(pre < lam, 1, 2).astype(np.int64)
    aoi = np.full((r, n), 2, dtype=np.int64)
    k = np.ones((r, n), dtype=np.int64)
    m = np.ones((r, n), dtype=np.int64)
    u = np.zeros((r, n), dtype=np.int64)
    lam_b = np.broadcast_to(lam, (r, n))

    reward = np.zeros(r)
    aoi_device_sum = np.zeros((r, n))
    delivered = np.zeros((r, n), dtype=np.int64)
    series = np.empty((r, t_total)) if collect_timeseries else None
    stats = None
    if collect_stats:
        stats = SlotStats(
            active_slots=np.zeros((r, m_ant + 1), dtype=np.int64),
            successes=np.zeros((r, m_ant + 1), dtype=np.int64),
            scheduled_active=np.zeros((r, m_ant + 1), dtype=np.int64),
            spike_events=np.zeros(r),
            spike_predicted=np.zeros(r),
            spike_slots=np.zeros(r),
        )

    t = 0
    while t < t_total:
        slots = min(TAPE_CHUNK, t_total - t)
        blocks = [tape.next_chunk(slots) for tape in tapes]
        policy_u = np.stack([b[0] for b in blocks])
        decode_u = np.stack([b[1] for b in blocks])
        arrival_u = np.stack([b[2] for b in blocks])
        for s in range(slots):
            slot_reward = (omega * aoi).sum(axis=1)
            reward += slot_reward
            aoi_device_sum += aoi
            if series is not None:
                series[:, t + s] = slot_reward / n

            scheduled = scheduler.select(k, m, u, lam_b, aoi, policy_u[:, s])
            active = scheduled & (aoi > d)
            if np.any(scheduled & ~active & (u > 0)):
                raise AssertionError(
                    "device with a pending failed transmission found inactive"
                )
            n_active = active.sum(axis=1)
            success = active & (decode_u[:, s, :] < p_table[n_active][:, None])
            empty = scheduled & ~active
            failed = active & ~success

            if stats is not None:
                np.add.at(stats.active_slots, (np.arange(r), n_active), 1)
                counts = np.broadcast_to(n_active[:, None], (r, n))
                np.add.at(stats.successes, (np.arange(r).repeat(n), counts.ravel()),
                          success.ravel().astype(np.int64))
                np.add.at(stats.scheduled_active, (np.arange(r).repeat(n), counts.ravel()),
                          active.ravel().astype(np.int64))
                no_fail = u == 0
                gamma_m = (1.0 - lam_b) ** m
                stats.spike_events += (no_fail & (d == aoi)).sum(axis=1)
                stats.spike_predicted += np.where(no_fail, gamma_m, 0.0).sum(axis=1)
                stats.spike_slots += no_fail.sum(axis=1)

            delivered += success

            # Belief evolution from the observations, vectorized over the
            # same cases as belief.evolve.
            k = np.where(success, d, np.where(empty, k + m, k))
            new_m = np.where(success | empty, 1, np.where(~scheduled & (u == 0), m + 1, m))
            new_u = np.where(
                success | empty, 0, np.where(failed | (~scheduled & (u > 0)), u + 1, u)
            )
            m, u = new_m, new_u

            aoi = np.where(success, d + 1, aoi + 1)
            d = np.where(arrival_u[:, s, :] < lam_b, 1, d + 1)
        t += slots

    results = []
    for i in range(r):
        results.append(
            RunResult(
                ewsaoi=float(reward[i] / (n * t_total)),
                per_device_mean_aoi=aoi_device_sum[i] / t_total,
                throughput=delivered[i] / t_total,
                aoi_timeseries=None if series is None else series[i].copy(),
            )
        )
    final_state = (k, m, u, d) if collect_final_state else None
    return results, stats, final_state


def run(
    config: NetworkConfig, spec: PolicySpec, collect_timeseries: bool = False
) -> RunResult:
    """Simulate a single run (run index 0 of the configured seed)."""
    seeds = run_seed_sequences(config)[:1]
    results, _, _ = _simulate_batch(config, spec, seeds, collect_timeseries=collect_timeseries)
    return results[0]


def _mc_batch(args) -> list[float]:
    config, spec, seeds = args
    results, _, _ = _simulate_batch(config, spec, seeds)
    return [res.ewsaoi for res in results]


def monte_carlo(
    config: NetworkConfig,
    spec: PolicySpec,
    workers: int = 1,
    batch_size: int = 256,
) -> MonteCarloResult:
    """EWSAoI mean and standard error over config.runs independent runs.

    Results depend only on the per-run seeds, never on the batch or worker
    layout.
    """
    seeds = run_seed_sequences(config)
    batches = [
        (config, spec, seeds[i : i + batch_size]) for i in range(0, len(seeds), batch_size)
    ]
    if workers > 1 and len(batches) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_mc_batch, batches))
    else:
        chunks = [_mc_batch(b) for b in batches]
    per_run = np.asarray([x for chunk in chunks for x in chunk])
    mean = float(per_run.mean())
    stderr = float(per_run.std(ddof=1) / np.sqrt(len(per_run))) if len(per_run) > 1 else 0.0
    return MonteCarloResult(mean=mean, stderr=stderr, per_run=per_run)


def step(
    truths: Sequence[DeviceTruth],
    beliefs: Sequence[BeliefTriple],
    policy: Callable[[Sequence[BeliefTriple]], ActionSet],
    rng: np.random.Generator,
    channel: ChannelParams,
    lambdas: Sequence[float],
    omegas: Sequence[float] | None = None,
) -> tuple[list[DeviceTruth], list[BeliefTriple], float]:
    """Reference single-slot transition; returns the slot's weighted reward.

    Draw order from rng: the policy's own draws (if any), one decode
    uniform per device, one arrival uniform per device.  The batched
    engine consumes the same logical layout, so a run replayed through
    this function against the engine's tape reproduces it exactly.
    """
    n = len(truths)
    lam = np.asarray(lambdas, dtype=np.float64)
    omega = np.ones(n) if omegas is None else np.asarray(omegas, dtype=np.float64)
    p_table = success_prob_table(channel)

    reward = float(sum(om * tr.aoi for om, tr in zip(omega, truths)))
    action = policy(beliefs)
    decode_u = rng.random(n)
    arrival_u = rng.random(n)

    scheduled = np.zeros(n, dtype=bool)
    scheduled[np.asarray(action.devices) - 1] = True
    active = scheduled & np.asarray([tr.has_packet for tr in truths])
    n_active = int(active.sum())
    success = active & (decode_u < p_table[n_active])

    new_truths = []
    new_beliefs = []
    for i in range(n):
        tr = truths[i]
        if success[i]:
            obs = Observation.success(tr.d)
            new_aoi = tr.d + 1
        else:
            obs = (
                Observation.failed()
                if active[i]
                else Observation.empty_buffer()
                if scheduled[i]
                else Observation.not_scheduled()
            )
            new_aoi = tr.aoi + 1
        new_d = 1 if arrival_u[i] < lam[i] else tr.d + 1
        new_truths.append(DeviceTruth(d=new_d, aoi=new_aoi))
        new_beliefs.append(evolve(beliefs[i], obs))
    return new_truths, new_beliefs, reward


def initial_state(
    config: NetworkConfig, rng: np.random.Generator
) -> tuple[list[DeviceTruth], list[BeliefTriple]]:
    """Slot-1 state: one arrival draw applied to a fresh network."""
    arrival_u = rng.random(config.n_devices)
    truths = [
        DeviceTruth(d=1 if arrival_u[i] < config.lambdas[i] else 2, aoi=2)
        for i in range(config.n_devices)
    ]
    beliefs = [BeliefTriple.initial(lam) for lam in config.lambdas]
    return truths, beliefs
