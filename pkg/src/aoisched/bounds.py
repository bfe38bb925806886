"""Performance bounds and weight configuration for the drift schedulers.

The EWSAoI of the drift scheduler is bounded above by the performance of
any stationary randomized schedule that plays action j with probability
xi_j.  Under such a schedule device i is served successfully at rate

    psi_i = sum_j [i in a_j] * xi_j * p(|a_j|),

and the bound is (1/N) sum_i (omega_i/lambda_i) (1/psi_i + 1/lambda_i),
achieved with drift weights beta_i = omega_i / (psi_i * lambda_i).
Minimizing the bound over xi is a convex problem on the probability
simplex; it is solved here with a conditional-gradient method.  For
symmetric networks the optimum is known in closed form: spread all mass
uniformly over the subsets of the throughput-optimal size n*.

A policy-independent floor comes from throughput feasibility: no schedule
can deliver device i's updates faster than min(lambda_i, its share of
M * p(1)), and the floor is evaluated by water-filling the per-device
throughputs against that budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, success_prob_table
from .drift import ActionSet, enumerate_actions, num_actions
from .policy import compute_n_star

MAX_XI_ACTIONS = 1_000_000


@dataclass(frozen=True)
class XiDistribution:
    """A probability distribution over the enumerated feasible actions.

    Actions are indexed in the canonical order: increasing cardinality,
    lexicographic within one cardinality.
    """

    xi: np.ndarray
    actions: tuple[ActionSet, ...]
    n_devices: int
    objective: float | None = None
    kkt_gap: float | None = None

    def __post_init__(self) -> None:
        if len(self.xi) != len(self.actions):
            raise ValueError(f"{len(self.xi)} weights for {len(self.actions)} actions")
        if np.any(self.xi < -1e-12):
            raise ValueError("action probabilities must be nonnegative")
        if abs(float(self.xi.sum()) - 1.0) > 1e-9:
            raise ValueError(f"action probabilities sum to {self.xi.sum()}, not 1")


@dataclass(frozen=True)
class BoundReport:
    """Bound values and the drift weights they configure."""

    psi: np.ndarray
    beta: np.ndarray
    upper: float
    lower: float
    n_star: int


class XiOptimizationError(RuntimeError):
    """Raised when the xi solver fails to reach the target gap."""

    def __init__(self, best: XiDistribution, gap: float, max_iters: int):
        super().__init__(
            f"no convergence after {max_iters} iterations, best gap {gap:.3e}"
        )
        self.best = best
        self.gap = gap


def _service_matrix(
    channel: ChannelParams, n_devices: int
) -> tuple[np.ndarray, list[ActionSet]]:
    """(N, N_a) matrix with entry (i, j) = [i in a_j] * p(|a_j|)."""
    actions = enumerate_actions(n_devices, channel.antennas, order="cardinality")
    p_table = success_prob_table(channel)
    mat = np.zeros((n_devices, len(actions)))
    for j, a in enumerate(actions):
        mat[np.asarray(a.devices) - 1, j] = p_table[len(a)]
    return mat, actions


def psi_from_xi(xi: XiDistribution, channel: ChannelParams) -> np.ndarray:
    """Per-device stationary service rates under the randomized schedule."""
    mat, actions = _service_matrix(channel, xi.n_devices)
    if tuple(a.devices for a in actions) != tuple(a.devices for a in xi.actions):
        raise ValueError("xi does not match the canonical action enumeration")
    return mat @ xi.xi


def upper_bound(psi: np.ndarray, lambdas: np.ndarray, omegas: np.ndarray) -> float:
    """EWSAoI upper bound for given service rates; inf when a rate is 0."""
    psi = np.asarray(psi, dtype=np.float64)
    lambdas = np.asarray(lambdas, dtype=np.float64)
    omegas = np.asarray(omegas, dtype=np.float64)
    if psi.shape != lambdas.shape or psi.shape != omegas.shape:
        raise ValueError("psi, lambdas, omegas must have equal length")
    if np.any(psi <= 0.0):
        return math.inf
    return float(np.mean(omegas / lambdas * (1.0 / psi + 1.0 / lambdas)))


def symmetric_upper_bound(
    channel: ChannelParams, lam: float, omega: float, n_devices: int
) -> tuple[float, int]:
    """Closed-form minimum upper bound of a symmetric network, with n*."""
    n_star = compute_n_star(channel)
    p_table = success_prob_table(channel)
    bound = omega / lam * (n_devices / (n_star * p_table[n_star]) + 1.0 / lam)
    return bound, n_star


def _line_search(
    psi: np.ndarray, delta: np.ndarray, w: np.ndarray, alpha_max: float
) -> float:
    """Exact minimizer of sum_i w_i / (psi_i + a * delta_i) on [0, alpha_max].

    The restriction is convex, so the derivative is increasing; bisect it.
    Components driven toward zero pin the feasible range strictly inside.
    """
    neg = delta < 0
    hi = alpha_max
    if np.any(neg):
        hi = min(hi, float((psi[neg] / -delta[neg]).min()) * (1.0 - 1e-12))
    if hi <= 0.0:
        return 0.0

    def dh(a: float) -> float:
        return float(np.sum(-w * delta / (psi + a * delta) ** 2))

    if dh(hi) <= 0.0:
        return hi
    lo = 0.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if dh(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def optimize_xi(
    channel: ChannelParams,
    lambdas: np.ndarray,
    omegas: np.ndarray,
    tol: float = 1e-9,
    max_iters: int = 100_000,
) -> XiDistribution:
    """Minimize the upper-bound objective sum_i w_i / psi_i(xi) over the simplex.

    Conditional-gradient method with away steps and exact line search,
    started from the uniform distribution (interior, so the objective is
    finite throughout).  Away steps purge mass from suboptimal actions,
    which plain conditional gradient only shrinks geometrically; they are
    what makes the tight default tolerance reachable.  Stops when the
    linearization gap (the simplex KKT residual) drops below tol.
    """
    lambdas = np.asarray(lambdas, dtype=np.float64)
    omegas = np.asarray(omegas, dtype=np.float64)
    n = len(lambdas)
    if len(omegas) != n:
        raise ValueError("lambdas and omegas must have equal length")
    if num_actions(n, channel.antennas) > MAX_XI_ACTIONS:
        raise ValueError(
            f"action space of {num_actions(n, channel.antennas)} exceeds the "
            f"solver cap {MAX_XI_ACTIONS}"
        )
    mat, actions = _service_matrix(channel, n)
    n_a = len(actions)
    w = omegas / lambdas

    xi = np.full(n_a, 1.0 / n_a)
    psi = mat @ xi
    gap = math.inf
    for it in range(max_iters):
        if it % 128 == 0:
            psi = mat @ xi  # refresh against incremental drift
        grad_xi = -(w / psi**2) @ mat
        fw = int(np.argmin(grad_xi))
        grad_dot_xi = float(grad_xi @ xi)
        gap = grad_dot_xi - float(grad_xi[fw])
        if gap <= tol:
            obj = float(np.sum(w / psi))
            return XiDistribution(
                xi=xi, actions=tuple(actions), n_devices=n, objective=obj, kkt_gap=gap
            )
        support = np.flatnonzero(xi > 0.0)
        away = int(support[np.argmax(grad_xi[support])])
        away_gap = float(grad_xi[away]) - grad_dot_xi
        alpha_max = xi[away] / (1.0 - xi[away]) if xi[away] < 1.0 else 0.0
        if gap >= away_gap or alpha_max <= 0.0:
            delta = mat[:, fw] - psi
            alpha = _line_search(psi, delta, w, 1.0)
            xi *= 1.0 - alpha
            xi[fw] += alpha
        else:
            delta = psi - mat[:, away]
            alpha = _line_search(psi, delta, w, alpha_max)
            xi *= 1.0 + alpha
            xi[away] = max(xi[away] - alpha, 0.0)
            if alpha >= alpha_max * (1.0 - 1e-12):
                xi[away] = 0.0
        psi = psi + alpha * delta
    best = XiDistribution(
        xi=xi / xi.sum(),
        actions=tuple(actions),
        n_devices=n,
        objective=float(np.sum(w / (mat @ (xi / xi.sum())))),
        kkt_gap=gap,
    )
    raise XiOptimizationError(best, gap, max_iters)


def universal_lower_bound(
    channel: ChannelParams, lambdas: np.ndarray, omegas: np.ndarray
) -> float:
    """Policy-independent EWSAoI floor from throughput feasibility."""
    value, _, _ = _ulb_solution(channel, lambdas, omegas)
    return value


def _ulb_solution(
    channel: ChannelParams, lambdas: np.ndarray, omegas: np.ndarray
) -> tuple[float, np.ndarray, float]:
    """Water-filled throughputs minimizing the AoI floor.

    Minimizes (1/2N) sum_i omega_i (1/q_i + 3) subject to
    sum_i q_i <= M * p(1) and 0 < q_i <= lambda_i.  The objective is
    decreasing in every q_i, so either all devices run at their arrival
    rates, or the budget binds and q_i = min(lambda_i, sqrt(omega_i)/nu)
    with the water level nu found by bisection.

    Returns (objective value, q, nu).
    """
    lambdas = np.asarray(lambdas, dtype=np.float64)
    omegas = np.asarray(omegas, dtype=np.float64)
    n = len(lambdas)
    if len(omegas) != n:
        raise ValueError("lambdas and omegas must have equal length")
    p_table = success_prob_table(channel)
    budget = channel.antennas * p_table[1]

    def objective(q: np.ndarray) -> float:
        return float(np.sum(omegas * (1.0 / q + 3.0)) / (2 * n))

    if float(lambdas.sum()) <= budget:
        return objective(lambdas), lambdas.copy(), 0.0

    root_w = np.sqrt(omegas)

    def supply(nu: float) -> float:
        return float(np.minimum(lambdas, root_w / nu).sum())

    lo = float((root_w / lambdas).min())  # everything capped: supply = sum(lambda)
    hi = max(float(root_w.sum()) / budget, lo * 2.0)
    while supply(hi) > budget:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if supply(mid) > budget:
            lo = mid
        else:
            hi = mid
    nu = 0.5 * (lo + hi)
    q = np.minimum(lambdas, root_w / nu)
    return objective(q), q, nu


def bound_report(
    channel: ChannelParams,
    lambdas: np.ndarray,
    omegas: np.ndarray,
    tol: float = 1e-9,
    max_iters: int = 100_000,
) -> BoundReport:
    """Upper/lower bounds plus the drift weights beta_i = omega_i/(psi_i lambda_i).

    Symmetric networks bypass the solver via the closed-form optimum; the
    solver still backs every asymmetric configuration.
    """
    lambdas = np.asarray(lambdas, dtype=np.float64)
    omegas = np.asarray(omegas, dtype=np.float64)
    n = len(lambdas)
    n_star = compute_n_star(channel)
    symmetric = np.ptp(lambdas) == 0.0 and np.ptp(omegas) == 0.0
    if symmetric:
        p_table = success_prob_table(channel)
        psi = np.full(n, n_star / n * p_table[n_star])
        upper = upper_bound(psi, lambdas, omegas)
    else:
        xi = optimize_xi(channel, lambdas, omegas, tol=tol, max_iters=max_iters)
        psi = psi_from_xi(xi, channel)
        upper = upper_bound(psi, lambdas, omegas)
    beta = omegas / (psi * lambdas)
    lower = universal_lower_bound(channel, lambdas, omegas)
    return BoundReport(psi=psi, beta=beta, upper=upper, lower=lower, n_star=n_star)
