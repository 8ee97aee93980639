"""Monte Carlo power studies.

Two data regimes: independent Gaussian e-values E_i = exp(lambda X_i -
lambda^2/2) with X_i standard normal under the null and mean-mu under the
alternative, and a correlated regime where the X_i share a Toeplitz-like
covariance (unit variances, |cov| decaying in |i - j| with alternating
sign) and are reported as one-sided p-values for the BY family.

Each trial runs every requested procedure on the same draw, records
realized FDP/TPR against the known null set, and hard-asserts the exact
per-trial set inclusions between dominating procedures: a violation is a
bug, never sampling noise, so it aborts the experiment with a dump.

Trials draw their generators from per-trial spawns of the master seed, so
results are reproducible and independent of execution order; set
CLOSURE_FDR_THREADS>1 to fan trials out over processes.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from functools import lru_cache, partial

import numpy as np
from scipy.special import ndtr

from .by import ByCalibratorParams, by_calibrate_vector, by_procedure
from .core import ConfigurationError, DiscoverySet, InvariantViolation, check_alpha, fdp_tpr
from .ebh import closed_ebh, ebh, ebh_minimally_adaptive

DEP_INDEPENDENT = "independent"
DEP_TOEPLITZ = "toeplitz-alt"

EVALUE_PROCEDURES = ("ebh", "ebhm", "cebh")
PVALUE_PROCEDURES = ("by", "by-ebhm", "cby")

# (smaller, larger): per-trial set inclusions that must hold exactly.
DOMINATION_EDGES = (
    ("ebh", "ebhm"), ("ebhm", "cebh"), ("ebh", "cebh"),
    ("by", "by-ebhm"), ("by-ebhm", "cby"), ("by", "cby"),
)


@dataclass(frozen=True)
class SimConfig:
    K: int = 100
    pi0: float = 0.9
    mu: float = 3.0
    lam: float | None = None  # e-value tilt; defaults to mu (log-optimal)
    alpha: float = 0.1
    trials: int = 1000
    dependence: str = DEP_INDEPENDENT
    decay: float = 10.0
    scale: float = 0.2
    seed: int = 0
    procedures: tuple = EVALUE_PROCEDURES

    def __post_init__(self):
        check_alpha(self.alpha)
        if self.K < 1:
            raise ConfigurationError(f"K must be >= 1, got {self.K}")
        if not 0.0 <= self.pi0 <= 1.0:
            raise ConfigurationError(f"pi0 must lie in [0, 1], got {self.pi0}")
        if self.trials < 1:
            raise ConfigurationError(f"trials must be >= 1, got {self.trials}")
        if self.dependence not in (DEP_INDEPENDENT, DEP_TOEPLITZ):
            raise ConfigurationError(f"unknown dependence {self.dependence!r}")
        object.__setattr__(self, "procedures", tuple(self.procedures))
        known = EVALUE_PROCEDURES if self.dependence == DEP_INDEPENDENT else PVALUE_PROCEDURES
        for name in self.procedures:
            if name not in known:
                raise ConfigurationError(
                    f"procedure {name!r} not available under {self.dependence} "
                    f"(choose from {', '.join(known)})"
                )
        if not self.procedures:
            raise ConfigurationError("at least one procedure is required")

    @property
    def tilt(self) -> float:
        return self.mu if self.lam is None else self.lam

    @property
    def null_count(self) -> int:
        return int(np.floor(self.pi0 * self.K))

    def null_set(self) -> frozenset:
        # nulls occupy a fixed index prefix; procedures are permutation
        # equivariant so the layout is immaterial
        return frozenset(range(1, self.null_count + 1))


@dataclass(frozen=True)
class TrialRecord:
    method: str
    trial: int
    fdp: float
    tpr: float
    k: int


@dataclass(frozen=True)
class AggregateRow:
    method: str
    mean_fdr: float
    se_fdr: float
    mean_tpr: float
    se_tpr: float
    n: int


@dataclass(frozen=True)
class ExperimentResult:
    config: SimConfig
    records: tuple
    aggregates: tuple


class DominationError(InvariantViolation):
    """A dominated procedure rejected outside its dominator's set."""

    def __init__(self, message: str, payload: dict):
        super().__init__(message)
        self.payload = payload


def trial_rng(cfg: SimConfig, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(trial,)))


def gen_independent(cfg: SimConfig, trial: int):
    """One trial of independent Gaussian e-values: returns (evalues, null set)."""
    rng = trial_rng(cfg, trial)
    x = rng.standard_normal(cfg.K)
    x[cfg.null_count:] += cfg.mu
    lam = cfg.tilt
    evalues = np.exp(lam * x - lam * lam / 2.0)
    return evalues, cfg.null_set()


def toeplitz_covariance(K: int, decay: float = 10.0, scale: float = 0.2) -> np.ndarray:
    """Unit-variance covariance with |cov(i,j)| = scale * exp(-|i-j|/decay),
    positive at even lags and negative at odd lags."""
    d = np.abs(np.subtract.outer(np.arange(K), np.arange(K)))
    sign = np.where(d % 2 == 0, 1.0, -1.0)
    cov = sign * scale * np.exp(-d / decay)
    np.fill_diagonal(cov, 1.0)
    return cov


@lru_cache(maxsize=8)
def _toeplitz_factor(K: int, decay: float, scale: float) -> np.ndarray:
    cov = toeplitz_covariance(K, decay, scale)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        smallest = float(np.min(np.linalg.eigvalsh(cov)))
        raise ConfigurationError(
            f"Toeplitz covariance is not positive definite for K={K} "
            f"(smallest eigenvalue {smallest:.3e})"
        ) from None


def gen_toeplitz(cfg: SimConfig, trial: int):
    """One trial of correlated Gaussians reported as one-sided p-values
    1 - Phi(X_i): returns (pvalues, null set)."""
    rng = trial_rng(cfg, trial)
    factor = _toeplitz_factor(cfg.K, cfg.decay, cfg.scale)
    x = factor @ rng.standard_normal(cfg.K)
    x[cfg.null_count:] += cfg.mu
    pvalues = ndtr(-x)
    return pvalues, cfg.null_set()


def _procedure_sets(cfg: SimConfig, data: np.ndarray) -> dict:
    alpha = cfg.alpha
    out = {}
    if cfg.dependence == DEP_INDEPENDENT:
        for name in cfg.procedures:
            if name == "ebh":
                out[name] = ebh(data, alpha).discoveries
            elif name == "ebhm":
                out[name] = ebh_minimally_adaptive(data, alpha).discoveries
            else:
                out[name] = closed_ebh(data, alpha).discoveries
    else:
        params = ByCalibratorParams.create(alpha, cfg.K)
        calibrated = by_calibrate_vector(data, params)
        for name in cfg.procedures:
            if name == "by":
                out[name] = by_procedure(data, alpha)
            elif name == "by-ebhm":
                out[name] = ebh_minimally_adaptive(calibrated, alpha).discoveries
            else:
                out[name] = closed_ebh(calibrated, alpha).discoveries
    return out


def _check_dominations(cfg: SimConfig, trial: int, data: np.ndarray, sets: dict) -> None:
    for small, large in DOMINATION_EDGES:
        if small in sets and large in sets:
            if not sets[small].as_set() <= sets[large].as_set():
                payload = {
                    "trial": trial,
                    "pair": [small, large],
                    "rejected_small": list(sets[small].rejected),
                    "rejected_large": list(sets[large].rejected),
                    "data": [float(v) for v in data],
                    "config": asdict(cfg),
                }
                raise DominationError(
                    f"trial {trial}: {small} rejected outside {large}", payload
                )


def _run_trial(cfg: SimConfig, trial: int) -> list:
    gen = gen_independent if cfg.dependence == DEP_INDEPENDENT else gen_toeplitz
    data, null_set = gen(cfg, trial)
    sets = _procedure_sets(cfg, data)
    _check_dominations(cfg, trial, data, sets)
    records = []
    for name in cfg.procedures:
        dset = sets[name]
        realized_fdp, tpr = fdp_tpr(null_set, dset, cfg.K)
        records.append(TrialRecord(method=name, trial=trial,
                                   fdp=realized_fdp, tpr=tpr, k=dset.k))
    return records


def _thread_count() -> int:
    raw = os.environ.get("CLOSURE_FDR_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"CLOSURE_FDR_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise ConfigurationError(f"CLOSURE_FDR_THREADS must be >= 1, got {n}")
    return n


def run_experiment(cfg: SimConfig) -> ExperimentResult:
    """Run every trial, aggregate per method, and return both levels.

    Aggregation is a deterministic reduction over trial indices, so the
    result does not depend on worker scheduling.
    """
    threads = _thread_count()
    if threads == 1:
        per_trial = [_run_trial(cfg, t) for t in range(cfg.trials)]
    else:
        chunk = max(1, cfg.trials // (threads * 8))
        with ProcessPoolExecutor(max_workers=threads) as pool:
            per_trial = list(pool.map(partial(_run_trial, cfg), range(cfg.trials),
                                      chunksize=chunk))
    records = tuple(rec for trial_records in per_trial for rec in trial_records)
    aggregates = []
    for name in cfg.procedures:
        fdps = np.array([r.fdp for r in records if r.method == name])
        tprs = np.array([r.tpr for r in records if r.method == name])
        n = fdps.size
        aggregates.append(AggregateRow(
            method=name,
            mean_fdr=float(np.mean(fdps)), se_fdr=_standard_error(fdps),
            mean_tpr=float(np.mean(tprs)), se_tpr=_standard_error(tprs),
            n=n,
        ))
    return ExperimentResult(config=cfg, records=records, aggregates=tuple(aggregates))


def _standard_error(samples: np.ndarray) -> float:
    if samples.size < 2:
        return 0.0
    return float(np.std(samples, ddof=1) / np.sqrt(samples.size))


TRIAL_HEADER = "method,pi0,mu,alpha,dependence,trial,k,fdp,tpr"
AGGREGATE_HEADER = "method,pi0,mu,alpha,dependence,mean_fdr,se_fdr,mean_tpr,se_tpr,n"


def _fmt(x: float) -> str:
    # repr of a Python float is the shortest round-trip decimal
    return repr(float(x))


def write_trials_csv(path, results) -> None:
    """Trial-level CSV for one or more experiments (UTF-8, LF endings)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(TRIAL_HEADER + "\n")
        for res in results:
            cfg = res.config
            stem = f"{_fmt(cfg.pi0)},{_fmt(cfg.mu)},{_fmt(cfg.alpha)},{cfg.dependence}"
            for rec in res.records:
                fh.write(f"{rec.method},{stem},{rec.trial},{rec.k},"
                         f"{_fmt(rec.fdp)},{_fmt(rec.tpr)}\n")


def write_aggregate_csv(path, results) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(AGGREGATE_HEADER + "\n")
        for res in results:
            cfg = res.config
            stem = f"{_fmt(cfg.pi0)},{_fmt(cfg.mu)},{_fmt(cfg.alpha)},{cfg.dependence}"
            for row in res.aggregates:
                fh.write(f"{row.method},{stem},{_fmt(row.mean_fdr)},{_fmt(row.se_fdr)},"
                         f"{_fmt(row.mean_tpr)},{_fmt(row.se_tpr)},{row.n}\n")
