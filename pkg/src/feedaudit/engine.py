"""Decision-robustness audit of a filtering algorithm against a baseline.

For every input the auditor queries both black boxes once, shuffles the two
feeds, fits the model family to each, and compares both information-weighted
distances between the estimates with tau = (2/m) chi2_r(1 - alpha). The filter
fails as soon as either distance reaches tau for any input.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import families as fam
from .errors import AuditAborted, ShapeError, SourceError
from .stats import (
    TestStatisticPair,
    Verdict,
    audit_threshold,
    robustness_decision,
    wald_statistic,
    wald_statistic_batch,
)

log = logging.getLogger(__name__)

STRICT = "strict"
FULL = "full"


class AlphaCapWarning(UserWarning):
    pass


@dataclass(frozen=True)
class AuditInput:
    id: str
    payload: Any = None


@dataclass
class InputAuditResult:
    input_id: str
    shuffle_bit: int
    theta_prime: np.ndarray
    theta_dprime: np.ndarray
    stats: TestStatisticPair
    tau: float
    verdict: Verdict
    flags: list = field(default_factory=list)
    midpoint_stat: float | None = None
    m: int = 0

    def to_dict(self):
        return {
            "input_id": self.input_id,
            "shuffle_bit": self.shuffle_bit,
            "theta_prime": [float(v) for v in self.theta_prime],
            "theta_dprime": [float(v) for v in self.theta_dprime],
            "stat_prime": self.stats.stat_prime,
            "stat_dprime": self.stats.stat_double_prime,
            "tau": self.tau,
            "verdict": self.verdict.value,
            "flags": list(self.flags),
            "midpoint_stat": self.midpoint_stat,
        }

    def csv_row(self):
        return (
            [self.input_id, self.shuffle_bit]
            + [repr(float(v)) for v in self.theta_prime]
            + [repr(float(v)) for v in self.theta_dprime]
            + [repr(self.stats.stat_prime), repr(self.stats.stat_double_prime), repr(self.tau)]
            + [self.verdict.value, ";".join(self.flags)]
        )


@dataclass
class AuditReport:
    config: dict
    results: list
    verdict: Verdict
    cumulative_fpr: float
    warnings: list = field(default_factory=list)
    complete: bool = True
    error: dict | None = None

    def to_dict(self):
        return {
            "config": self.config,
            "verdict": self.verdict.value,
            "complete": self.complete,
            "cumulative_fpr": self.cumulative_fpr,
            "warnings": list(self.warnings),
            "error": self.error,
            "results": [r.to_dict() for r in self.results],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def csv_header(self):
        r = self.config["family"]["dimension"]
        return (
            ["input_id", "shuffle_bit"]
            + [f"theta_prime_{i}" for i in range(r)]
            + [f"theta_dprime_{i}" for i in range(r)]
            + ["stat_prime", "stat_dprime", "tau", "verdict", "flags"]
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.csv_header())
        for res in self.results:
            w.writerow(res.csv_row())
        return buf.getvalue()


def input_rng(seed, index) -> np.random.Generator:
    """Per-input stream, independent of evaluation order."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(index),)))


def shuffle_pair(Z, Z_B, rng):
    """(Z, Z_B, 0) or (Z_B, Z, 1) with probability 1/2 each."""
    if len(Z) != len(Z_B):
        raise ShapeError(f"feeds have different lengths {len(Z)} and {len(Z_B)}")
    bit = int(rng.integers(0, 2))
    return (Z, Z_B, 0) if bit == 0 else (Z_B, Z, 1)


def statistic_at(family, theta_a, theta_b, at) -> float:
    """(theta_a - theta_b)' I(at) (theta_a - theta_b).

    Where the information at ``at`` diverges (a clamped estimate on a singular
    boundary), the family's limiting quadratic form is used instead.
    """
    if family.is_singular(at):
        return family.quadratic_form(at, np.asarray(theta_a) - np.asarray(theta_b))
    return wald_statistic(theta_a, theta_b, family.fisher_information(at))


def pair_statistics(family, theta_p, theta_pp) -> TestStatisticPair:
    return TestStatisticPair(
        statistic_at(family, theta_p, theta_pp, theta_p),
        statistic_at(family, theta_p, theta_pp, theta_pp),
    )


def _midpoint(family, theta_p, theta_pp):
    mid = 0.5 * (theta_p + theta_pp)
    if not family.in_domain(mid) or family.is_singular(mid):
        return None
    return wald_statistic(theta_p, theta_pp, family.fisher_information(mid))


def audit_feeds(Z_prime, Z_dprime, family, alpha, shuffle_bit=0, input_id="", m=None):
    """Estimate, test and decide for one already-shuffled pair of feeds."""
    if len(Z_prime) != len(Z_dprime):
        raise ShapeError(f"feeds have different lengths {len(Z_prime)} and {len(Z_dprime)}")
    m = len(Z_prime) if m is None else m
    threshold = audit_threshold(family.dimension, m, alpha)
    est_p = fam.mle(family, Z_prime)
    est_pp = fam.mle(family, Z_dprime)
    pair = pair_statistics(family, est_p.theta, est_pp.theta)
    flags = [f"{flag}:prime" for flag in est_p.flags] + [f"{flag}:dprime" for flag in est_pp.flags]
    return InputAuditResult(
        input_id=input_id,
        shuffle_bit=int(shuffle_bit),
        theta_prime=est_p.theta,
        theta_dprime=est_pp.theta,
        stats=pair,
        tau=threshold.tau,
        verdict=robustness_decision(pair, threshold),
        flags=flags,
        midpoint_stat=_midpoint(family, est_p.theta, est_pp.theta),
        m=int(m),
    )


def decision_robustness_check(Z, Z_B, family, alpha) -> Verdict:
    """Verdict for materialised feeds; lets a platform check itself before an audit."""
    return audit_feeds(_as_feed(family, Z, "Z"), _as_feed(family, Z_B, "Z_B"), family, alpha).verdict


def _as_feed(family, items, source_name, input_id=None, m=None):
    try:
        arr = np.asarray(items)
    except (ValueError, TypeError) as exc:
        raise SourceError(source_name, f"malformed feed: {exc}", input_id) from exc
    if arr.ndim != 1 or arr.size == 0:
        raise SourceError(source_name, f"feed must be a non-empty flat list, got shape {arr.shape}", input_id)
    if m is not None and arr.size != m:
        raise SourceError(source_name, f"feed has {arr.size} items, expected m={m}", input_id)
    if not np.all(family.in_support(arr)):
        raise SourceError(source_name, f"feed items outside the {family.sample_space} sample space", input_id)
    return family.as_feed(arr)


def audit_input(F, B, x: AuditInput, family, alpha, rng, m=None) -> InputAuditResult:
    """Query both sources for ``x``, shuffle, fit and test."""
    Z = _as_feed(family, F.query(x), F.name, x.id, m)
    Z_B = _as_feed(family, B.query(x), B.name, x.id, m if m is not None else len(Z))
    Zp, Zpp, bit = shuffle_pair(Z, Z_B, rng)
    return audit_feeds(Zp, Zpp, family, alpha, bit, x.id)


def run_audit(F, B, X, family, alpha, mode=FULL, seed=0, m=None, jobs=1) -> AuditReport:
    """Audit every input in ``X``.

    ``mode="strict"`` stops at the first failing input; ``mode="full"`` evaluates
    all inputs (optionally on ``jobs`` threads). Both give the same overall verdict.
    A source error aborts the run with :class:`AuditAborted` carrying the partial report.
    """
    X = list(X)
    if not X:
        raise ValueError("need at least one audit input")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if mode not in (STRICT, FULL):
        raise ValueError(f"mode must be 'strict' or 'full', got {mode!r}")
    ids = [x.id for x in X]
    if len(set(ids)) != len(ids):
        raise ValueError("audit input ids must be unique")

    n = len(X)
    notes = []
    if alpha > 1.0 / n:
        msg = f"alpha={alpha:g} exceeds 1/n={1.0 / n:g}; cumulative false positive rate bound n*alpha={n * alpha:g}"
        warnings.warn(msg, AlphaCapWarning, stacklevel=2)
        notes.append(msg)

    config = {
        "alpha": float(alpha),
        "m": m,
        "n": n,
        "family": family.to_dict(),
        "seed": seed,
        "mode": mode,
        "filter_source": F.name,
        "baseline_source": B.name,
    }
    results = []
    state = {"m": m}

    def one(i):
        return audit_input(F, B, X[i], family, alpha, input_rng(seed, i), state["m"])

    def report(verdict, complete, error=None):
        config["m"] = state["m"]
        return AuditReport(dict(config), list(results), verdict, n * float(alpha), notes, complete, error)

    try:
        if mode == STRICT or jobs <= 1:
            for i in range(n):
                res = one(i)
                if state["m"] is None:
                    state["m"] = res.m
                results.append(res)
                if mode == STRICT and res.verdict is Verdict.FAIL:
                    return report(Verdict.FAIL, complete=(i == n - 1))
        else:
            if state["m"] is None:
                first = one(0)
                state["m"] = first.m
                rest = range(1, n)
            else:
                first, rest = None, range(n)
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                futures = [pool.submit(one, i) for i in rest]
                if first is not None:
                    results.append(first)
                for fut in futures:
                    results.append(fut.result())
    except SourceError as exc:
        error = {"type": "source-error", "source": exc.source, "input_id": exc.input_id, "message": str(exc)}
        partial = report(Verdict.FAIL, complete=False, error=error)
        raise AuditAborted(exc, partial) from exc

    overall = Verdict.FAIL if any(r.verdict is Verdict.FAIL for r in results) else Verdict.PASS
    return report(overall, complete=True)


def audit_batch(family, Z, Z_B, alpha, bits=None):
    """Vectorised audit of many independent (filter, baseline) feed pairs.

    ``Z`` and ``Z_B`` are (T, m) arrays. Returns (fail flags, stat_prime, stat_dprime).
    Matches :func:`audit_feeds` row by row.
    """
    Z = np.asarray(Z)
    Z_B = np.asarray(Z_B)
    if Z.shape != Z_B.shape or Z.ndim != 2:
        raise ShapeError(f"need two (T, m) arrays of equal shape, got {Z.shape} and {Z_B.shape}")
    T, m = Z.shape
    tau = audit_threshold(family.dimension, m, alpha).tau
    if bits is None:
        bits = np.zeros(T, dtype=int)
    swap = np.asarray(bits).astype(bool)[:, None]
    Zp = np.where(swap, Z_B, Z)
    Zpp = np.where(swap, Z, Z_B)
    th_p, _ = fam.mle_batch(family, Zp)
    th_pp, _ = fam.mle_batch(family, Zpp)
    stats = []
    for at in (th_p, th_pp):
        info = family.fisher_batch(at)
        s = wald_statistic_batch(th_p, th_pp, info)
        bad = ~np.isfinite(s) | ~np.all(np.isfinite(info), axis=(1, 2))
        for i in np.nonzero(bad)[0]:
            s[i] = statistic_at(family, th_p[i], th_pp[i], at[i])
        stats.append(s)
    fail = (stats[0] >= tau) | (stats[1] >= tau)
    return fail, stats[0], stats[1]
