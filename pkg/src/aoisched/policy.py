"""Scheduling policies over belief snapshots.

Every policy maps the per-device belief triples (and, for the baseline
that ignores beliefs, the AoI values alone) to a set of at most M devices
to schedule:

  ds      drift scheduling: argmin of the one-slot Lyapunov drift over all
          nonempty subsets of size <= M, or over the M ranked prefix sets
          when the reduced action space is enabled.
  fs      fixed-size scheduling: like ds but over subsets of exactly n*
          devices, where n* maximizes n * p(n).
  fs-K    fixed-size baseline at an arbitrary size K (fs-1 is the
          partially-observable max-weight baseline).
  mwa     max weighted AoI: ignores beliefs, keeps the top-K devices by
          omega_i * D_i for the best K.
  random  uniform over the whole action space.

Ties between candidate sets are always broken toward the smallest
lexicographic device-index sequence so repeated runs are reproducible.

The module has two layers: scalar functions operating on one belief
snapshot (the reference implementations, directly testable against
brute-force enumeration), and a batched scheduler evaluating whole
batches of simulation runs per slot with the same selection rules.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .belief import BeliefTriple, active_probability, age_gap_array, expected_age_gap, phi_array
from .channel import ChannelParams, success_prob_table
from .drift import ActionSet, DriftWeights, enumerate_actions, num_actions

MAX_ENUMERATED_ACTIONS = 1_000_000

_KINDS = ("ds", "fs", "fsk", "mwa", "random")


@dataclass(frozen=True)
class PolicySpec:
    """A named scheduling policy plus its configuration.

    weights defaults to all-ones when unset; n_star (fs only) defaults to
    the throughput-optimal size computed from the channel.  fs-K baselines
    run on the reduced action space by default, which is how they are
    normally evaluated.
    """

    kind: str
    reduced: bool = False
    k: int | None = None
    weights: DriftWeights | None = None
    n_star: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind == "fsk":
            if self.k is None or self.k < 1:
                raise ValueError("fs-K policy needs a fixed size k >= 1")
        elif self.k is not None:
            raise ValueError(f"{self.kind} takes no fixed size k")
        if self.n_star is not None and self.kind != "fs":
            raise ValueError("n_star is only meaningful for the fs policy")

    @property
    def name(self) -> str:
        if self.kind == "ds":
            return "ds-reduced" if self.reduced else "ds"
        if self.kind == "fs":
            return "fs-reduced" if self.reduced else "fs"
        if self.kind == "fsk":
            return f"fs-{self.k}"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "PolicySpec":
        """Parse a policy name like "ds", "fs-reduced", "fs-3", "mwa"."""
        name = text.strip().lower()
        if name == "pomw":
            name = "fs-1"
        if name in ("ds", "fs"):
            return cls(kind=name)
        if name in ("ds-reduced", "fs-reduced"):
            return cls(kind=name.split("-")[0], reduced=True)
        if name in ("mwa", "random"):
            return cls(kind=name)
        if name.startswith("fs-"):
            try:
                k = int(name[3:])
            except ValueError:
                raise ValueError(f"unknown policy {text!r}") from None
            return cls(kind="fsk", k=k, reduced=True)
        raise ValueError(f"unknown policy {text!r}")

    def with_weights(self, weights: DriftWeights) -> "PolicySpec":
        return PolicySpec(self.kind, self.reduced, self.k, weights, self.n_star)


def compute_n_star(channel: ChannelParams) -> int:
    """Size maximizing n * p(n), the expected deliveries per slot.

    Ties break toward the smaller size.
    """
    p_table = success_prob_table(channel)
    best_n, best_value = 1, p_table[1]
    for n in range(2, channel.antennas + 1):
        value = n * p_table[n]
        if value > best_value:
            best_n, best_value = n, value
    return best_n


# ---------------------------------------------------------------------------
# Vectorized subset scoring
#
# The drift of a candidate set S decomposes as
#     drift(S) = (sum_i beta_i - score(S)) / N,
#     score(S) = sum_{i in S} beta_i * G_i * csp_i(S),
# so selecting the drift-minimizing candidate is selecting the
# score-maximizing one.  csp_i(S) averages p(c+1) over the distribution of
# the number c of active devices among S \ {i}; that distribution is built
# by convolving the members' Bernoulli activities, with leave-one-out
# handled through prefix/suffix partial products.
# ---------------------------------------------------------------------------


def _member_scores(
    ph: Sequence[np.ndarray], gn: Sequence[np.ndarray], p_table: np.ndarray
) -> np.ndarray:
    """score of each candidate set from member activities and gains.

    ph, gn: per-member arrays of activity probabilities and beta*G gains,
    all of one common candidate shape.  One forward pass carries the
    members' activity-count pmf together with the gain-weighted
    leave-one-out pmfs: adding member j convolves both with its activity
    and seeds the accumulator with g_j times the pmf of the members before
    it.  Zero-activity, zero-gain members are exact padding, which lets
    candidates of different sizes share one pass.  The count axis lives as
    a list of contiguous arrays, which numpy handles much faster than a
    strided trailing axis.
    """
    size = len(ph)
    lead = ph[0].shape
    pmf = [np.ones(lead)]
    acc = [np.zeros(lead)]
    for j in range(size):
        phi_j = ph[j]
        nphi = 1.0 - phi_j
        new_acc = [acc[0] * nphi]
        for c in range(1, len(acc)):
            new_acc.append(acc[c] * nphi + acc[c - 1] * phi_j)
        new_acc.append(acc[-1] * phi_j)
        for c in range(len(pmf)):
            new_acc[c] += gn[j] * pmf[c]
        new_pmf = [pmf[0] * nphi]
        for c in range(1, len(pmf)):
            new_pmf.append(pmf[c] * nphi + pmf[c - 1] * phi_j)
        new_pmf.append(pmf[-1] * phi_j)
        acc, pmf = new_acc, new_pmf
    # acc[c] = sum_j g_j * P(c others of j active); counts reach size-1.
    score = acc[0] * p_table[1]
    for c in range(1, size):
        score += acc[c] * p_table[c + 1]
    return score


class SubsetTables:
    """Precomputed member indices of every subset of size <= max_size."""

    def __init__(self, n_devices: int, max_size: int):
        if num_actions(n_devices, max_size) > MAX_ENUMERATED_ACTIONS:
            raise ValueError(
                f"action space of {num_actions(n_devices, max_size)} subsets exceeds "
                f"the enumeration cap {MAX_ENUMERATED_ACTIONS}"
            )
        self.n_devices = n_devices
        self.max_size = max_size
        self.actions = enumerate_actions(n_devices, max_size, order="cardinality")
        n_a = len(self.actions)
        # (C_K, K) 0-based member arrays, one per cardinality K, plus the
        # contiguous column range each K occupies in cardinality-major order.
        self.groups = []
        self.card_slices = []
        lo = 0
        for size in range(1, max_size + 1):
            rows = [a.devices for a in self.actions if len(a) == size]
            self.groups.append(np.asarray(rows, dtype=np.int64) - 1)
            self.card_slices.append((lo, lo + len(rows)))
            lo += len(rows)
        keys = [a.devices for a in self.actions]
        # Column permutation mapping lex rank -> cardinality-major position.
        self.lex_to_card = np.asarray(
            sorted(range(len(keys)), key=lambda i: keys[i]), dtype=np.int64
        )
        masks = np.zeros((n_a, n_devices), dtype=bool)
        for i, a in enumerate(self.actions):
            masks[i, np.asarray(a.devices) - 1] = True
        self.masks = masks
        self.masks_lex = masks[self.lex_to_card]


def _subset_scores(
    phi: np.ndarray, gain: np.ndarray, p_table: np.ndarray, tables: SubsetTables
) -> np.ndarray:
    """Scores of all enumerated subsets, (runs, N_a), cardinality-major."""
    parts = []
    for idx in tables.groups:
        ph = [phi[:, idx[:, j]] for j in range(idx.shape[1])]
        gn = [gain[:, idx[:, j]] for j in range(idx.shape[1])]
        parts.append(_member_scores(ph, gn, p_table))
    return np.concatenate(parts, axis=1)


def _ranked_prefix_scores(
    phi: np.ndarray, gain: np.ndarray, p_table: np.ndarray, max_size: int
) -> tuple[np.ndarray, np.ndarray]:
    """Rank devices by gain and score the prefix sets of size 1..max_size.

    Returns (order, scores): order (runs, N) ranks devices by descending
    beta*G with index tie-break; scores (runs, max_size).
    """
    order = np.argsort(-gain, axis=1, kind="stable")
    ph = np.take_along_axis(phi, order[:, :max_size], axis=1)
    gn = np.take_along_axis(gain, order[:, :max_size], axis=1)
    # Candidate column c is the prefix of size c + 1; its members are the
    # ranked devices 0..c, so member j pads to zero on columns before j.
    cols = np.arange(max_size)
    ph_c = [np.where(cols >= j, ph[:, j : j + 1], 0.0) for j in range(max_size)]
    gn_c = [np.where(cols >= j, gn[:, j : j + 1], 0.0) for j in range(max_size)]
    return order, _member_scores(ph_c, gn_c, p_table)


def _pick_prefix_size(score_row: np.ndarray, order_row: np.ndarray) -> int:
    """Best prefix length; drift ties resolved by lexicographic members."""
    best = score_row.max()
    tied = np.flatnonzero(score_row == best)
    if len(tied) == 1:
        return int(tied[0]) + 1
    return min(
        (int(t) + 1 for t in tied),
        key=lambda size: tuple(sorted(order_row[:size] + 1)),
    )


def _snapshot_arrays(
    beliefs: Sequence[BeliefTriple], weights: DriftWeights
) -> tuple[np.ndarray, np.ndarray]:
    beta = weights.as_array()
    if len(beta) != len(beliefs):
        raise ValueError(f"{len(beta)} weights for {len(beliefs)} devices")
    phi = np.array([[active_probability(b) for b in beliefs]])
    gap = np.array([[expected_age_gap(b) for b in beliefs]])
    return phi, beta[None, :] * gap


def ds_schedule(
    beliefs: Sequence[BeliefTriple],
    weights: DriftWeights,
    channel: ChannelParams,
    reduced: bool = False,
) -> ActionSet:
    """Drift-minimizing schedule over subsets of size <= antennas.

    reduced=True restricts the candidates to the prefix sets of the
    beta*G ranking (one per size), trading optimality for an M-candidate
    search.
    """
    n = len(beliefs)
    m_ant = channel.antennas
    if n < m_ant:
        raise ValueError(f"need at least as many devices as antennas, got {n} < {m_ant}")
    phi, gain = _snapshot_arrays(beliefs, weights)
    p_table = success_prob_table(channel)
    if reduced:
        order, scores = _ranked_prefix_scores(phi, gain, p_table, m_ant)
        size = _pick_prefix_size(scores[0], order[0])
        return ActionSet(tuple(sorted(order[0, :size] + 1)))
    tables = SubsetTables(n, m_ant)
    scores = _subset_scores(phi, gain, p_table, tables)[0]
    tied = np.flatnonzero(scores == scores.max())
    return min((tables.actions[i] for i in tied), key=lambda a: a.devices)


def fs_schedule(
    beliefs: Sequence[BeliefTriple],
    weights: DriftWeights,
    channel: ChannelParams,
    n_star: int,
    reduced: bool = False,
) -> ActionSet:
    """Drift-minimizing schedule over subsets of exactly n_star devices.

    reduced=True skips the search and returns the n_star devices with the
    largest beta*G directly.
    """
    n = len(beliefs)
    if not 1 <= n_star <= channel.antennas <= n:
        raise ValueError(
            f"need 1 <= n_star <= antennas <= devices, got {n_star}, {channel.antennas}, {n}"
        )
    phi, gain = _snapshot_arrays(beliefs, weights)
    p_table = success_prob_table(channel)
    if reduced:
        order = np.argsort(-gain[0], kind="stable")
        return ActionSet(tuple(sorted(order[:n_star] + 1)))
    idx = (
        np.asarray(
            [a.devices for a in enumerate_actions(n, channel.antennas) if len(a) == n_star],
            dtype=np.int64,
        )
        - 1
    )
    ph = [phi[:, idx[:, j]] for j in range(n_star)]
    gn = [gain[:, idx[:, j]] for j in range(n_star)]
    scores = _member_scores(ph, gn, p_table)[0]
    tied = np.flatnonzero(scores == scores.max())
    return min((ActionSet(tuple(idx[i] + 1)) for i in tied), key=lambda a: a.devices)


def mwa_schedule(
    aois: Sequence[int], omegas: Sequence[float], channel: ChannelParams
) -> ActionSet:
    """Baseline ignoring beliefs: best top-K set under p(K) * sum omega*D.

    For each K the candidate is the K devices with the largest weighted
    AoI (ties by index); the K maximizing the throughput-discounted sum
    wins, smaller K first on ties.
    """
    n = len(aois)
    m_ant = channel.antennas
    if n < m_ant:
        raise ValueError(f"need at least as many devices as antennas, got {n} < {m_ant}")
    w = np.asarray(omegas, dtype=np.float64) * np.asarray(aois, dtype=np.float64)
    p_table = success_prob_table(channel)
    order = np.argsort(-w, kind="stable")
    sums = np.cumsum(w[order])[:m_ant]
    scores = p_table[1 : m_ant + 1] * sums
    best_k = int(np.argmax(scores)) + 1
    return ActionSet(tuple(sorted(order[:best_k] + 1)))


def random_schedule(
    n_devices: int, channel: ChannelParams, rng: np.random.Generator
) -> ActionSet:
    """Uniform draw over all nonempty subsets of size <= antennas.

    Consumes exactly one uniform from the generator and maps it to an
    action index, so batched and scalar simulations stay draw-for-draw
    aligned.
    """
    n_a = num_actions(n_devices, channel.antennas)
    idx = min(int(rng.random() * n_a), n_a - 1)
    return enumerate_actions(n_devices, channel.antennas, order="cardinality")[idx]


def make_policy(
    spec: PolicySpec,
    channel: ChannelParams,
    omegas: Sequence[float],
    rng: np.random.Generator | None = None,
):
    """Bind a PolicySpec into a callable beliefs -> ActionSet."""
    n = len(omegas)
    weights = spec.weights if spec.weights is not None else DriftWeights.ones(n)
    if spec.kind == "ds":
        return lambda beliefs: ds_schedule(beliefs, weights, channel, reduced=spec.reduced)
    if spec.kind in ("fs", "fsk"):
        size = _fixed_size(spec, channel)
        return lambda beliefs: fs_schedule(beliefs, weights, channel, size, reduced=spec.reduced)
    if spec.kind == "mwa":
        omega_arr = np.asarray(omegas, dtype=np.float64)
        return lambda beliefs: mwa_schedule([b.aoi for b in beliefs], omega_arr, channel)
    if rng is None:
        raise ValueError("the random policy needs a generator")
    return lambda beliefs: random_schedule(len(beliefs), channel, rng)


def _fixed_size(spec: PolicySpec, channel: ChannelParams) -> int:
    if spec.kind == "fsk":
        size = spec.k
    else:
        size = spec.n_star if spec.n_star is not None else compute_n_star(channel)
    assert size is not None
    if not 1 <= size <= channel.antennas:
        raise ValueError(f"fixed size {size} outside 1..{channel.antennas}")
    return size


class BatchedScheduler:
    """Per-slot schedule masks for a whole batch of simulation runs.

    Applies exactly the same selection and tie-breaking rules as the
    scalar functions above, with candidate scoring vectorized across runs.
    """

    def __init__(
        self,
        spec: PolicySpec,
        channel: ChannelParams,
        n_devices: int,
        omegas: Sequence[float],
    ):
        self.spec = spec
        self.n_devices = n_devices
        self.m_ant = channel.antennas
        if n_devices < self.m_ant:
            raise ValueError(
                f"need at least as many devices as antennas, got {n_devices} < {self.m_ant}"
            )
        weights = spec.weights if spec.weights is not None else DriftWeights.ones(n_devices)
        self.beta = weights.as_array()
        if len(self.beta) != n_devices:
            raise ValueError(f"{len(self.beta)} weights for {n_devices} devices")
        self.omegas = np.asarray(omegas, dtype=np.float64)
        self.p_table = success_prob_table(channel)
        self.size = _fixed_size(spec, channel) if spec.kind in ("fs", "fsk") else None
        self.tables: SubsetTables | None = None
        if (spec.kind in ("ds", "fs", "fsk") and not spec.reduced) or spec.kind == "random":
            self.tables = SubsetTables(n_devices, self.m_ant)
        self.uses_policy_draw = spec.kind == "random"

    def select(
        self,
        k: np.ndarray,
        m: np.ndarray,
        u: np.ndarray,
        lam: np.ndarray,
        aoi: np.ndarray,
        policy_u: np.ndarray,
    ) -> np.ndarray:
        """(runs, N) boolean mask of scheduled devices for this slot."""
        spec = self.spec
        if spec.kind == "random":
            assert self.tables is not None
            n_a = len(self.tables.actions)
            idx = np.minimum((policy_u * n_a).astype(np.int64), n_a - 1)
            return self.tables.masks[idx]
        if spec.kind == "mwa":
            w = self.omegas[None, :] * aoi
            order = np.argsort(-w, axis=1, kind="stable")
            sums = np.cumsum(np.take_along_axis(w, order, axis=1)[:, : self.m_ant], axis=1)
            best_k = np.argmax(self.p_table[1 : self.m_ant + 1] * sums, axis=1) + 1
            return _prefix_mask(order, best_k, self.n_devices)
        phi = phi_array(m, u, lam)
        gain = self.beta[None, :] * age_gap_array(k, m, u, lam)
        if spec.kind == "ds" and not spec.reduced:
            assert self.tables is not None
            scores = _subset_scores(phi, gain, self.p_table, self.tables)
            best = np.argmax(scores[:, self.tables.lex_to_card], axis=1)
            return self.tables.masks_lex[best]
        if spec.kind == "ds":
            order, scores = _ranked_prefix_scores(phi, gain, self.p_table, self.m_ant)
            best_k = np.argmax(scores, axis=1) + 1
            ties = (scores == scores.max(axis=1, keepdims=True)).sum(axis=1) > 1
            for r in np.flatnonzero(ties):
                best_k[r] = _pick_prefix_size(scores[r], order[r])
            return _prefix_mask(order, best_k, self.n_devices)
        assert spec.kind in ("fs", "fsk") and self.size is not None
        if spec.reduced:
            order = np.argsort(-gain, axis=1, kind="stable")
            return _prefix_mask(order, np.full(len(order), self.size), self.n_devices)
        assert self.tables is not None
        lo, _ = self.tables.card_slices[self.size - 1]
        idx = self.tables.groups[self.size - 1]
        ph = [phi[:, idx[:, j]] for j in range(idx.shape[1])]
        gn = [gain[:, idx[:, j]] for j in range(idx.shape[1])]
        scores = _member_scores(ph, gn, self.p_table)
        best = np.argmax(scores, axis=1)  # rows are already lex-sorted
        return self.tables.masks[lo + best]


def _prefix_mask(order: np.ndarray, sizes: np.ndarray, n_devices: int) -> np.ndarray:
    """Mask selecting the first sizes[r] entries of order[r] per run."""
    take = np.arange(n_devices)[None, :] < sizes[:, None]
    masks = np.zeros(order.shape, dtype=bool)
    np.put_along_axis(masks, order, take, axis=1)
    return masks
