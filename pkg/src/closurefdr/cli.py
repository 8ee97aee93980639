"""Command-line interface.

Subcommands: `run` applies a procedure to a file of values and prints a
JSON result; `verify` cross-checks a fast procedure against the exhaustive
oracle; `simulate` runs the Monte Carlo harness and writes trial/aggregate
CSVs; `calibrate` maps a file of p-values to e-values.

Exit codes: 0 ok, 2 input error, 3 capacity exceeded, 4 verification
mismatch, 5 invariant violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bruteforce
from .by import ByCalibratorParams, by_calibrate_vector, by_procedure, closed_by_result
from .closure import ClosureProblem, closed_fwer, closed_general
from .core import (
    CapacityError,
    ConfigurationError,
    DiscoverySet,
    DomainError,
    ErrorMetric,
    InvariantViolation,
    as_evalues,
    as_pvalues,
    check_alpha,
    top_k_indices,
)
from .ebh import closed_ebh, closed_ebh_compound, closed_ebh_product, ebh, \
    ebh_minimally_adaptive, fdr_hat
from .enhance import randomized_closed_ebh
from .merging import ArithmeticMeanCollection
from .sim import (
    DEP_INDEPENDENT,
    DEP_TOEPLITZ,
    DominationError,
    SimConfig,
    run_experiment,
    write_aggregate_csv,
    write_trials_csv,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CAPACITY = 3
EXIT_MISMATCH = 4
EXIT_INVARIANT = 5

PROCEDURES = ("ebh", "ebhm", "cebh", "cebh-product", "cebh-compound",
              "by", "cby", "eholm", "closed")
KIND_FOR_PROCEDURE = {
    "by": "pvalues", "cby": "pvalues",
    "cebh-compound": "compound",
}


def read_value_file(path: str) -> list:
    """Parse a CSV (one value per line, optional single header line) or a
    JSON array into a list of floats. Errors carry 1-based line numbers."""
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if path.endswith(".json") or stripped.startswith("["):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DomainError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, list):
            raise DomainError(f"{path}: JSON input must be an array of numbers")
        values = []
        for i, item in enumerate(data, start=1):
            if not isinstance(item, (int, float)) or isinstance(item, bool):
                raise DomainError(f"{path}: element {i} is not a number")
            values.append(float(item))
        if not values:
            raise DomainError(f"{path}: no values parsed")
        return values
    values = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        cell = line.strip().rstrip(",")
        if not cell:
            continue
        try:
            values.append(float(cell))
        except ValueError:
            if lineno == 1 and not values:
                continue  # a single header line is allowed
            raise DomainError(f"{path}: line {lineno}: cannot parse {cell!r}") from None
    if not values:
        raise DomainError(f"{path}: no values parsed")
    return values


def _validate_kind(values: list, kind: str, path: str) -> np.ndarray:
    if kind == "pvalues":
        for i, v in enumerate(values, start=1):
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{path}: line {i}: p-value {v} outside [0, 1]")
        return as_pvalues(values)
    for i, v in enumerate(values, start=1):
        if not (np.isfinite(v) and v >= 0.0):
            raise DomainError(f"{path}: line {i}: e-value {v} must be finite and >= 0")
    return as_evalues(values)


def parse_metric(spec: str) -> ErrorMetric:
    spec = spec.strip().lower()
    if spec == "fdp":
        return ErrorMetric.fdp()
    if spec == "pfer":
        return ErrorMetric.pfer()
    if spec.startswith("kfwer:"):
        return ErrorMetric.kfwer(int(spec.split(":", 1)[1]))
    if spec.startswith("fdx:"):
        return ErrorMetric.fdx(float(spec.split(":", 1)[1]))
    raise DomainError(f"unknown metric {spec!r} (use fdp, kfwer:k, pfer, fdx:g)")


def _emit(payload: dict) -> None:
    print(json.dumps(payload))


def cmd_run(args) -> int:
    alpha = check_alpha(args.alpha)
    kind = args.kind or KIND_FOR_PROCEDURE.get(args.procedure, "evalues")
    expected = KIND_FOR_PROCEDURE.get(args.procedure, "evalues")
    if kind != expected:
        raise DomainError(
            f"procedure {args.procedure} needs {expected} input, got kind={kind}"
        )
    values = _validate_kind(read_value_file(args.file), kind, args.file)
    seed_used = None
    diag = None
    if args.procedure == "ebh":
        res = ebh(values, alpha)
        dset, diag = res.discoveries, fdr_hat(values, res.k_star)
    elif args.procedure == "ebhm":
        res = ebh_minimally_adaptive(values, alpha)
        dset, diag = res.discoveries, fdr_hat(values, res.k_star)
    elif args.procedure == "cebh":
        if args.randomize:
            if args.seed is None:
                raise DomainError("--randomize requires --seed")
            res = randomized_closed_ebh(values, alpha, args.seed)
            seed_used = args.seed
        else:
            res = closed_ebh(values, alpha)
        dset, diag = res.discoveries, fdr_hat(values, res.k_star)
    elif args.procedure == "cebh-product":
        dset = closed_ebh_product(values, alpha).discoveries
    elif args.procedure == "cebh-compound":
        dset = closed_ebh_compound(values, alpha).discoveries
    elif args.procedure == "by":
        dset = by_procedure(values, alpha)
    elif args.procedure == "cby":
        res = closed_by_result(values, alpha)
        params = ByCalibratorParams.create(alpha, len(values))
        dset = res.discoveries
        diag = fdr_hat(by_calibrate_vector(values, params), res.k_star)
    elif args.procedure == "eholm":
        dset = closed_fwer(values, alpha)
    else:  # closed with an explicit metric
        metric = parse_metric(args.metric)
        coll = ArithmeticMeanCollection(values)
        dset = closed_general(ClosureProblem(coll, metric, alpha))
    payload = {"procedure": args.procedure, "alpha": alpha,
               "k": dset.k, "rejected": list(dset.rejected)}
    if diag is not None:
        payload["fdr_hat"] = diag
    if seed_used is not None:
        payload["seed"] = seed_used
    _emit(payload)
    return EXIT_OK


def cmd_verify(args) -> int:
    alpha = check_alpha(args.alpha)
    metric = parse_metric(args.metric)
    values = _validate_kind(read_value_file(args.file), "evalues", args.file)
    coll = ArithmeticMeanCollection(values)
    fast = closed_general(ClosureProblem(coll, metric, alpha))
    fast_set = set(fast.rejected)
    if os.environ.get("CLOSURE_FDR_FAULT_INJECT", "").strip() == "1":
        # self-test hook for the mismatch reporting path
        candidates = set(range(1, len(values) + 1)) - fast_set
        fast_set = fast_set | {min(candidates)} if candidates else set(list(fast_set)[1:])
    oracle_k = bruteforce.max_topk_candidate_size(coll, metric, alpha, values)
    oracle_set = set(top_k_indices(values, oracle_k))
    print(f"fast:   k={len(fast_set)} rejected={sorted(fast_set)}")
    print(f"oracle: k={oracle_k} rejected={sorted(oracle_set)}")
    if fast_set == oracle_set:
        print("MATCH")
        return EXIT_OK
    print("MISMATCH")
    return EXIT_MISMATCH


PRESETS = {
    "smoke": [dict(K=20, pi0=0.8, mu=3.0, alpha=0.1, trials=5,
                   dependence=DEP_INDEPENDENT, procedures=("ebh", "ebhm", "cebh"))],
    "gaussian-grid": [dict(K=100, pi0=pi0, mu=3.0, lam=3.0, alpha=0.1, trials=1000,
                           dependence=DEP_INDEPENDENT,
                           procedures=("ebh", "ebhm", "cebh"))
                      for pi0 in (0.5, 0.7, 0.9)],
    "by-grid": [dict(K=100, pi0=pi0, mu=3.0, alpha=0.1, trials=1000,
                     dependence=DEP_TOEPLITZ, procedures=("by", "by-ebhm", "cby"))
                for pi0 in (0.5, 0.7, 0.9)],
}

_CONFIG_KEYS = {"k": "K", "pi0": "pi0", "mu": "mu", "lam": "lam", "alpha": "alpha",
                "trials": "trials", "dependence": "dependence", "seed": "seed",
                "procedures": "procedures", "decay": "decay", "scale": "scale"}


def _parse_flat_value(key: str, raw: str):
    raw = raw.strip().strip('"').strip("'")
    if key == "procedures":
        return tuple(p.strip() for p in raw.split(",") if p.strip())
    if key == "dependence":
        return raw
    if key in ("k", "trials", "seed"):
        return int(raw)
    return float(raw)


def load_config_file(path: str) -> dict:
    """JSON object or flat key = value lines ('#' comments allowed)."""
    text = Path(path).read_text(encoding="utf-8")
    if path.endswith(".json") or text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path}: config must be a JSON object")
        raw = {str(k).lower(): v for k, v in data.items()}
    else:
        raw = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}: line {lineno}: expected key = value")
            key, _, value = line.partition("=")
            raw[key.strip().lower()] = _parse_flat_value(key.strip().lower(), value)
    out = {}
    for key, value in raw.items():
        if key not in _CONFIG_KEYS:
            raise ConfigurationError(f"{path}: unknown config key {key!r}")
        field = _CONFIG_KEYS[key]
        if field == "procedures" and isinstance(value, list):
            value = tuple(value)
        out[field] = value
    return out


def cmd_simulate(args) -> int:
    if args.preset:
        if args.preset not in PRESETS:
            raise ConfigurationError(
                f"unknown preset {args.preset!r} (choose from {', '.join(PRESETS)})"
            )
        base_list = [dict(d) for d in PRESETS[args.preset]]
    elif args.config:
        base_list = [load_config_file(args.config)]
    else:
        base_list = [{}]
    overrides = {}
    for field in ("mu", "lam", "alpha", "decay", "scale"):
        value = getattr(args, field)
        if value is not None:
            overrides[field] = value
    if args.k is not None:
        overrides["K"] = args.k
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.dependence is not None:
        overrides["dependence"] = args.dependence
    if args.procedures is not None:
        overrides["procedures"] = tuple(p.strip() for p in args.procedures.split(","))
    pi0_values = None
    if args.pi0 is not None:
        pi0_values = [float(p) for p in args.pi0.split(",")]
    configs = []
    for base in base_list:
        merged = dict(base)
        merged.update(overrides)
        for pi0 in (pi0_values if pi0_values is not None
                    else [merged.get("pi0", SimConfig.pi0)]):
            merged_pi = dict(merged)
            merged_pi["pi0"] = pi0
            try:
                configs.append(SimConfig(**merged_pi))
            except TypeError as exc:
                raise ConfigurationError(f"bad simulation config: {exc}") from None
    if pi0_values is not None:
        # pi0 grid replaces any per-preset grid; dedupe identical configs
        seen, unique = set(), []
        for cfg in configs:
            if cfg not in seen:
                seen.add(cfg)
                unique.append(cfg)
        configs = unique
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = []
    try:
        for cfg in configs:
            results.append(run_experiment(cfg))
    except DominationError as exc:
        dump_path = out_dir / "invariant-violation.json"
        dump_path.write_text(json.dumps(exc.payload, indent=2), encoding="utf-8")
        print(f"invariant violation: {exc}; trial dump at {dump_path}", file=sys.stderr)
        return EXIT_INVARIANT
    write_trials_csv(out_dir / "trials.csv", results)
    write_aggregate_csv(out_dir / "aggregate.csv", results)
    print(f"{'method':<10} {'pi0':>5} {'dep':<12} {'FDR':>8} {'seFDR':>8} "
          f"{'TPR':>8} {'seTPR':>8} {'n':>6}")
    for res in results:
        for row in res.aggregates:
            print(f"{row.method:<10} {res.config.pi0:>5.2f} {res.config.dependence:<12} "
                  f"{row.mean_fdr:>8.4f} {row.se_fdr:>8.4f} "
                  f"{row.mean_tpr:>8.4f} {row.se_tpr:>8.4f} {row.n:>6}")
    print(f"wrote {out_dir / 'trials.csv'} and {out_dir / 'aggregate.csv'}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    alpha = check_alpha(args.alpha)
    values = _validate_kind(read_value_file(args.file), "pvalues", args.file)
    params = ByCalibratorParams.create(alpha, len(values))
    for e in by_calibrate_vector(values, params):
        print(repr(float(e)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="closurefdr",
        description="E-value multiple testing procedures with FDR control",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="apply a procedure to a file of values")
    p_run.add_argument("file")
    p_run.add_argument("--procedure", required=True, choices=PROCEDURES)
    p_run.add_argument("--alpha", type=float, required=True)
    p_run.add_argument("--metric", default="fdp",
                       help="for --procedure closed: fdp | kfwer:k | pfer | fdx:g")
    p_run.add_argument("--kind", choices=("evalues", "pvalues", "compound"))
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--randomize", action="store_true",
                       help="stochastic rounding for cebh (needs --seed)")
    p_run.set_defaults(fn=cmd_run)

    p_verify = sub.add_parser("verify", help="cross-check against the exhaustive oracle")
    p_verify.add_argument("file")
    p_verify.add_argument("--alpha", type=float, required=True)
    p_verify.add_argument("--metric", default="fdp")
    p_verify.set_defaults(fn=cmd_verify)

    p_sim = sub.add_parser("simulate", help="run the Monte Carlo harness")
    p_sim.add_argument("--config", help="JSON or flat key = value config file")
    p_sim.add_argument("--preset", help=f"one of: {', '.join(PRESETS)}")
    p_sim.add_argument("--out", default="sim-out", help="output directory for CSVs")
    p_sim.add_argument("--k", type=int)
    p_sim.add_argument("--pi0", help="null proportion, or comma list for a grid")
    p_sim.add_argument("--mu", type=float)
    p_sim.add_argument("--lam", type=float)
    p_sim.add_argument("--alpha", type=float)
    p_sim.add_argument("--trials", type=int)
    p_sim.add_argument("--dependence", choices=(DEP_INDEPENDENT, DEP_TOEPLITZ))
    p_sim.add_argument("--decay", type=float)
    p_sim.add_argument("--scale", type=float)
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--procedures", help="comma-separated method names")
    p_sim.set_defaults(fn=cmd_simulate)

    p_cal = sub.add_parser("calibrate", help="map p-values to e-values")
    p_cal.add_argument("file")
    p_cal.add_argument("--alpha", type=float, required=True)
    p_cal.set_defaults(fn=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (DomainError, ConfigurationError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DominationError as exc:  # pragma: no cover - surfaced in cmd_simulate
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
