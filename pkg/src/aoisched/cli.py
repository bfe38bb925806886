"""Command-line front end: config files, sweeps, CSV results.

Subcommands
-----------
simulate      Monte-Carlo EWSAoI of the configured policies over an
              optional parameter sweep, one CSV row per (policy, point).
bounds        Upper/lower EWSAoI bounds and drift weights for the
              configured network, one CSV row per sweep point.
optimize-xi   Dump of the optimized randomized-schedule distribution.
verify-belief Conditioned-histogram checks of the belief closed forms
              (marginal summaries and the joint factorization).

Configs are JSON documents; see _REQUIRED/_DEFAULTS below for the keys.
The SNR is given in dB and converted to the linear scale here; the path
gain is distance ** -path_loss_tau.  Exit codes: 0 ok, 2 config error,
3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, replace

import numpy as np

from .belief import BeliefTriple, belief_pmf
from .bounds import XiOptimizationError, bound_report, optimize_xi
from .channel import ChannelParams
from .drift import DriftWeights
from .policy import PolicySpec
from .simcore import NetworkConfig, monte_carlo
from .verify import conditioned_belief, independence_check, independence_plan, single_device_plan

_REQUIRED = ("n_devices", "antennas", "snr_db", "lambdas", "omegas", "horizon", "runs")
_DEFAULTS = {"distance": 5.0, "path_loss_tau": 2.0, "gamma_th": 1.0, "seed": 0, "policies": []}
_SWEEPABLE = ("lambdas", "snr_db", "antennas", "n_devices")

SIMULATE_COLUMNS = [
    "policy", "N", "M", "snr_db", "lambda_spec", "omega_spec", "T", "runs",
    "ewsaoi_mean", "ewsaoi_stderr", "upper_bound", "lower_bound", "n_star",
    "wall_time_s",
]


class ConfigError(ValueError):
    """Config document rejected; message carries the field-level reasons."""


@dataclass(frozen=True)
class Settings:
    """Validated config document."""

    n_devices: int
    antennas: int
    snr_db: float
    distance: float
    path_loss_tau: float
    gamma_th: float
    lambda_spec: object
    omega_spec: object
    horizon: int
    runs: int
    seed: int
    policies: tuple[str, ...]
    sweep: tuple[str, tuple[object, ...]] | None

    def to_document(self) -> dict:
        doc = {
            "n_devices": self.n_devices,
            "antennas": self.antennas,
            "snr_db": self.snr_db,
            "distance": self.distance,
            "path_loss_tau": self.path_loss_tau,
            "gamma_th": self.gamma_th,
            "lambdas": self.lambda_spec,
            "omegas": self.omega_spec,
            "horizon": self.horizon,
            "runs": self.runs,
            "seed": self.seed,
            "policies": list(self.policies),
        }
        if self.sweep is not None:
            doc["sweep"] = {"parameter": self.sweep[0], "values": list(self.sweep[1])}
        return doc

    @property
    def omega_linear(self) -> float:
        return self.distance ** -self.path_loss_tau

    def channel(self) -> ChannelParams:
        return ChannelParams(
            antennas=self.antennas,
            snr=10.0 ** (self.snr_db / 10.0),
            omega=self.omega_linear,
            gamma_th=self.gamma_th,
        )

    def lambdas(self) -> tuple[float, ...]:
        return _resolve_rates(self.lambda_spec, self.n_devices, "lambdas")

    def omegas(self) -> tuple[float, ...]:
        return _resolve_rates(self.omega_spec, self.n_devices, "omegas")

    def network(self) -> NetworkConfig:
        return NetworkConfig(
            n_devices=self.n_devices,
            channel=self.channel(),
            lambdas=self.lambdas(),
            omegas=self.omegas(),
            horizon=self.horizon,
            runs=self.runs,
            seed=self.seed,
        )


def _resolve_rates(spec: object, n: int, field: str) -> tuple[float, ...]:
    """Expand a scalar, list, or "asym:base,step" shorthand to n entries.

    The shorthand spreads a base value b as b / (1 + step * (i - 1)) over
    devices i = 1..n.
    """
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return (float(spec),) * n
    if isinstance(spec, list):
        if len(spec) != n:
            raise ConfigError(f"{field}: list has {len(spec)} entries for {n} devices")
        return tuple(float(x) for x in spec)
    if isinstance(spec, str) and spec.startswith("asym:"):
        try:
            base_s, step_s = spec[5:].split(",")
            base, step = float(base_s), float(step_s)
        except ValueError:
            raise ConfigError(f"{field}: malformed shorthand {spec!r}") from None
        return tuple(base / (1.0 + step * i) for i in range(n))
    raise ConfigError(f"{field}: expected a number, list, or 'asym:base,step', got {spec!r}")


def parse_settings(doc: dict) -> Settings:
    """Validate a config document, raising ConfigError with every problem."""
    problems = []
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    for key in _REQUIRED:
        if key not in doc:
            problems.append(f"{key}: required field is missing")
    unknown = set(doc) - set(_REQUIRED) - set(_DEFAULTS) - {"sweep"}
    for key in sorted(unknown):
        problems.append(f"{key}: unknown field")
    if problems:
        raise ConfigError("; ".join(problems))

    merged = {**_DEFAULTS, **doc}
    for key in ("n_devices", "antennas", "horizon", "runs", "seed"):
        if not isinstance(merged[key], int) or isinstance(merged[key], bool):
            problems.append(f"{key}: must be an integer")
    for key in ("snr_db", "distance", "path_loss_tau", "gamma_th"):
        if not isinstance(merged[key], (int, float)) or isinstance(merged[key], bool):
            problems.append(f"{key}: must be a number")
    if not isinstance(merged["policies"], list) or not all(
        isinstance(p, str) for p in merged["policies"]
    ):
        problems.append("policies: must be a list of policy names")
    sweep = None
    if "sweep" in doc:
        raw = doc["sweep"]
        if (
            not isinstance(raw, dict)
            or set(raw) != {"parameter", "values"}
            or raw.get("parameter") not in _SWEEPABLE
            or not isinstance(raw.get("values"), list)
            or not raw["values"]
        ):
            problems.append(
                f"sweep: expected {{'parameter': one of {_SWEEPABLE}, 'values': nonempty list}}"
            )
        else:
            sweep = (raw["parameter"], tuple(raw["values"]))
    if problems:
        raise ConfigError("; ".join(problems))

    settings = Settings(
        n_devices=merged["n_devices"],
        antennas=merged["antennas"],
        snr_db=float(merged["snr_db"]),
        distance=float(merged["distance"]),
        path_loss_tau=float(merged["path_loss_tau"]),
        gamma_th=float(merged["gamma_th"]),
        lambda_spec=merged["lambdas"],
        omega_spec=merged["omegas"],
        horizon=merged["horizon"],
        runs=merged["runs"],
        seed=merged["seed"],
        policies=tuple(merged["policies"]),
        sweep=sweep,
    )
    for p in settings.policies:
        try:
            PolicySpec.parse(p)
        except ValueError as exc:
            problems.append(f"policies: {exc}")
    if settings.n_devices < settings.antennas:
        problems.append("n_devices: must be at least the antenna count")
    try:
        settings.channel()
        settings.lambdas()
        settings.omegas()
        settings.network()
    except (ConfigError, ValueError) as exc:
        problems.append(str(exc))
    if problems:
        raise ConfigError("; ".join(problems))
    return settings


def load_settings(path: str) -> Settings:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return parse_settings(doc)


def sweep_points(settings: Settings) -> list[Settings]:
    """The configured sweep expanded to per-point settings, in order."""
    if settings.sweep is None:
        return [settings]
    parameter, values = settings.sweep
    points = []
    for value in values:
        if parameter == "lambdas":
            if isinstance(settings.lambda_spec, str):
                base = settings.lambda_spec
                step = base[5:].split(",")[1]
                point = replace(settings, lambda_spec=f"asym:{value},{step}", sweep=None)
            elif isinstance(settings.lambda_spec, list):
                raise ConfigError("lambdas sweep needs a scalar or shorthand base spec")
            else:
                point = replace(settings, lambda_spec=value, sweep=None)
        elif parameter == "snr_db":
            point = replace(settings, snr_db=float(value), sweep=None)
        elif parameter == "antennas":
            point = replace(settings, antennas=int(value), sweep=None)
        else:
            point = replace(settings, n_devices=int(value), sweep=None)
        points.append(point)
    return points


def _fmt(value: object) -> str:
    """CSV cell: floats at 9 significant digits, inf as 'unbounded'."""
    if isinstance(value, float):
        if not np.isfinite(value):
            return "unbounded"
        return format(value, ".9g")
    return str(value)


def _write_csv(out, header: list[str], rows: list[list[object]]) -> None:
    import csv

    writer = csv.writer(out)  # csv defaults to RFC-4180 CRLF line endings
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(cell) for cell in row])


def _spec_string(raw: object) -> str:
    if isinstance(raw, list):
        return json.dumps(raw)
    return str(raw)


def cmd_simulate(args) -> int:
    settings = load_settings(args.config)
    if args.seed is not None:
        settings = replace(settings, seed=args.seed)
    policies = tuple(args.policy) if args.policy else settings.policies
    if not policies:
        raise ConfigError("policies: no policies configured (config key or --policy)")
    for p in policies:
        PolicySpec.parse(p)

    rows = []
    for point in sweep_points(settings):
        network = point.network()
        channel = point.channel()
        lambdas = np.asarray(point.lambdas())
        omegas = np.asarray(point.omegas())
        report = bound_report(channel, lambdas, omegas)
        weights = DriftWeights.from_array(report.beta)
        for name in policies:
            spec = PolicySpec.parse(name)
            if spec.kind in ("ds", "fs", "fsk"):
                spec = spec.with_weights(weights)
            started = time.perf_counter()
            mc = monte_carlo(network, spec, workers=args.workers)
            wall = 0.0 if args.fixed_walltime else time.perf_counter() - started
            rows.append(
                [
                    spec.name,
                    point.n_devices,
                    point.antennas,
                    point.snr_db,
                    _spec_string(point.lambda_spec),
                    _spec_string(point.omega_spec),
                    point.horizon,
                    point.runs,
                    mc.mean,
                    mc.stderr,
                    report.upper,
                    report.lower,
                    report.n_star,
                    wall,
                ]
            )
    _emit(args.out, SIMULATE_COLUMNS, rows)
    return 0


def cmd_bounds(args) -> int:
    settings = load_settings(args.config)
    rows = []
    for point in sweep_points(settings):
        report = bound_report(
            point.channel(), np.asarray(point.lambdas()), np.asarray(point.omegas())
        )
        rows.append(
            [
                point.n_devices,
                point.antennas,
                point.snr_db,
                _spec_string(point.lambda_spec),
                _spec_string(point.omega_spec),
                report.n_star,
                report.upper,
                report.lower,
                float(report.psi.min()),
                float(report.beta.max()),
            ]
        )
    _emit(
        args.out,
        ["N", "M", "snr_db", "lambda_spec", "omega_spec", "n_star",
         "upper_bound", "lower_bound", "psi_min", "beta_max"],
        rows,
    )
    return 0


def cmd_optimize_xi(args) -> int:
    settings = load_settings(args.config)
    xi = optimize_xi(
        settings.channel(),
        np.asarray(settings.lambdas()),
        np.asarray(settings.omegas()),
        tol=args.tol,
        max_iters=args.max_iters,
    )
    rows = [
        ["+".join(str(d) for d in action.devices), len(action), weight,
         xi.objective, xi.kkt_gap]
        for action, weight in zip(xi.actions, xi.xi)
    ]
    _emit(args.out, ["action", "cardinality", "xi", "objective", "kkt_gap"], rows)
    return 0


def cmd_verify_belief(args) -> int:
    settings = load_settings(args.config) if args.config else None
    seed = args.seed if args.seed is not None else (settings.seed if settings else 0)
    rows = []
    for k, m, u in ((5, 1, 4), (3, 2, 3), (8, 3, 2), (1, 4, 1)):
        lam = 0.7
        res = conditioned_belief(single_device_plan(k, m, u, lam), args.samples, seed=seed)
        theory = belief_pmf(BeliefTriple(k, m, u, lam), max(5, m + u))
        marginal = res.marginals[0]
        assert marginal is not None
        for age in range(1, 6):
            empirical = float(marginal[age - 1]) if age - 1 < len(marginal) else 0.0
            rows.append(
                ["marginal", k, m, u, lam, age, float(theory[age - 1]), empirical,
                 abs(empirical - float(theory[age - 1])), res.matched]
            )
    plan = independence_plan()
    res = conditioned_belief(plan, args.samples, seed=seed)
    for point in ((1, 1, 1), (1, 2, 3), (3, 2, 1)):
        prod = 1.0
        for pos in range(3):
            marginal = res.marginals[pos]
            assert marginal is not None
            prod *= float(marginal[point[pos] - 1])
        joint = res.joint.get(point, 0.0)
        rows.append(
            ["joint", "", "", "", "", "d=" + "|".join(map(str, point)), prod, joint,
             abs(joint - prod), res.matched]
        )
    _emit(
        args.out,
        ["check", "k", "m", "u", "lam", "point", "theoretical", "empirical",
         "abs_error", "matched_samples"],
        rows,
    )
    return 0


def _emit(out_path: str | None, header: list[str], rows: list[list[object]]) -> None:
    if out_path is None:
        _write_csv(sys.stdout, header, rows)
    else:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            _write_csv(fh, header, rows)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aoisched",
        description="Belief-based multiuser scheduling simulator and bound calculator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="Monte-Carlo EWSAoI of the configured policies")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--policy", action="append", default=None,
                     help="override the config's policy list (repeatable)")
    sim.add_argument("--fixed-walltime", action="store_true",
                     help="write 0 for wall_time_s so output is byte-reproducible")
    sim.set_defaults(func=cmd_simulate)

    bnd = sub.add_parser("bounds", help="EWSAoI bounds and drift weights")
    bnd.add_argument("--config", required=True)
    bnd.add_argument("--out", default=None)
    bnd.set_defaults(func=cmd_bounds)

    oxi = sub.add_parser("optimize-xi", help="optimized randomized-schedule distribution")
    oxi.add_argument("--config", required=True)
    oxi.add_argument("--out", default=None)
    oxi.add_argument("--tol", type=float, default=1e-9)
    oxi.add_argument("--max-iters", type=int, default=100_000)
    oxi.set_defaults(func=cmd_optimize_xi)

    ver = sub.add_parser("verify-belief", help="belief closed-form validation tables")
    ver.add_argument("--config", default=None)
    ver.add_argument("--out", default=None)
    ver.add_argument("--samples", type=int, default=80_000)
    ver.add_argument("--seed", type=int, default=None)
    ver.set_defaults(func=cmd_verify_belief)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except XiOptimizationError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
