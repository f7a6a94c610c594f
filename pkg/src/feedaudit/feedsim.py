"""Synthetic platforms, baselines and audit inputs.

Every simulated source draws the feed for an input from a stream derived from
``(seed, input id)``, so a source answers the same input identically no matter
how many other inputs it served before or in which order. The same derivation
runs inside the reference black-box executable (``python -m feedaudit.blackbox``),
which is what makes in-process and subprocess sources bit-identical.
"""
from __future__ import annotations

import hashlib
import shlex
from dataclasses import dataclass

import numpy as np

from . import families as fam
from .engine import AuditInput
from .errors import ConfigError
from .sources import InProcessSource, SubprocessSource


def query_rng(seed, input_id: str) -> np.random.Generator:
    key = int.from_bytes(hashlib.sha256(input_id.encode("utf-8")).digest()[:8], "little")
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))


@dataclass(frozen=True)
class ContentPools:
    baseline_pool: np.ndarray
    injected_pool: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.baseline_pool)
        i = np.asarray(self.injected_pool)
        if b.size == 0:
            raise ConfigError("baseline pool is empty")
        if np.intersect1d(b, i).size:
            raise ConfigError("baseline and injected pools overlap")
        object.__setattr__(self, "baseline_pool", b)
        object.__setattr__(self, "injected_pool", i)


@dataclass(frozen=True)
class ParametricFilterPolicy:
    family: fam.ModelFamily
    theta: tuple

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(v) for v in self.family.check(self.theta)))


def uniform_baseline_source(pools: ContentPools, m: int, seed, name="baseline") -> InProcessSource:
    """m items drawn uniformly with replacement from the baseline pool."""
    pool = pools.baseline_pool
    if pool.size == 0:
        raise ConfigError("baseline pool is empty")
    if m < 1:
        raise ConfigError("m must be at least 1")

    def draw(x):
        idx = query_rng(seed, x.id).integers(0, pool.size, m)
        return pool[idx].tolist()

    return InProcessSource(draw, name)


def parametric_filter_source(policy: ParametricFilterPolicy, m: int, seed, name="filter") -> InProcessSource:
    """m i.i.d. draws from the policy's distribution; the input payload is ignored."""
    if m < 1:
        raise ConfigError("m must be at least 1")

    def draw(x):
        return fam.sample_feed(policy.family, policy.theta, m, query_rng(seed, x.id)).tolist()

    return InProcessSource(draw, name)


def mixed_pool_source(pools: ContentPools, injected_fraction: float, m: int, seed, name="filter") -> InProcessSource:
    """Each slot holds injected content with probability ``injected_fraction``, baseline content otherwise."""
    lam = float(injected_fraction)
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"injected fraction must lie in [0, 1], got {lam}")
    if lam > 0 and pools.injected_pool.size == 0:
        raise ConfigError("injected pool is empty")
    base, inj = pools.baseline_pool, pools.injected_pool

    def draw(x):
        rng = query_rng(seed, x.id)
        use_inj = rng.random(m) < lam
        bi = rng.integers(0, base.size, m)
        ii = rng.integers(0, max(inj.size, 1), m)
        out = base[bi].astype(float)
        if inj.size:
            out[use_inj] = inj[ii[use_inj]]
        return out.tolist()

    return InProcessSource(draw, name)


def gaussian_pool_baseline(mu0, sigma2_0, pool_size, rng, injected_mu=2.0, injected_sigma2=1.0,
                           injected_size=None) -> ContentPools:
    """Finite baseline pool from N(mu0, sigma2_0) plus an injected pool from N(injected_mu, injected_sigma2)."""
    if pool_size < 1:
        raise ConfigError("pool_size must be at least 1")
    injected_size = pool_size if injected_size is None else injected_size
    base = rng.normal(mu0, np.sqrt(sigma2_0), pool_size)
    inj = rng.normal(injected_mu, np.sqrt(injected_sigma2), injected_size)
    inj = np.setdiff1d(inj, base, assume_unique=False) if injected_size else inj
    return ContentPools(base, inj)


def generate_inputs(n: int, spec=None, rng=None) -> list[AuditInput]:
    """n synthetic users ``input-000, input-001, ...`` with random feature payloads.

    ``spec`` may set ``dimension`` (default 4) and ``distribution`` ("normal" or "uniform").
    """
    if n < 1:
        raise ConfigError("need at least one input")
    spec = dict(spec or {})
    d = int(spec.get("dimension", 4))
    dist = spec.get("distribution", "normal")
    rng = np.random.default_rng(0) if rng is None else rng
    width = max(3, len(str(n - 1)))
    out = []
    for i in range(n):
        if dist == "normal":
            payload = rng.normal(size=d)
        elif dist == "uniform":
            payload = rng.random(d)
        else:
            raise ConfigError(f"unknown payload distribution {dist!r}")
        out.append(AuditInput(f"input-{i:0{width}d}", payload.tolist()))
    return out


def pools_from_spec(spec: dict, seed) -> ContentPools:
    """Pools either listed verbatim (``baseline``/``injected``) or drawn from Gaussians."""
    if "baseline" in spec:
        return ContentPools(np.asarray(spec["baseline"], dtype=float), np.asarray(spec.get("injected", []), dtype=float))
    rng = np.random.default_rng(np.random.SeedSequence(int(spec.get("seed", seed))))
    return gaussian_pool_baseline(
        float(spec.get("mu", 0.0)),
        float(spec.get("sigma2", 1.0)),
        int(spec.get("size", 100_000)),
        rng,
        injected_mu=float(spec.get("injected_mu", 2.0)),
        injected_sigma2=float(spec.get("injected_sigma2", 1.0)),
        injected_size=spec.get("injected_size"),
    )


def build_source(spec: dict, family, m, seed, name):
    """Construct a feed source from a config entry.

    Kinds: ``parametric`` (theta), ``uniform-pool`` (pool), ``mixed-pool``
    (pool, injected_fraction) and ``subprocess`` (command, timeout).
    """
    kind = spec.get("kind")
    if kind == "subprocess":
        command = spec["command"]
        command = shlex.split(command) if isinstance(command, str) else list(command)
        return SubprocessSource(command, name=name, m=m, timeout=float(spec.get("timeout", 30.0)))
    if m is None:
        raise ConfigError(f"source {name!r}: simulated sources need the feed length m")
    src_seed = int(spec.get("seed", seed))
    if kind == "parametric":
        return parametric_filter_source(ParametricFilterPolicy(family, tuple(spec["theta"])), m, src_seed, name)
    if kind == "uniform-pool":
        return uniform_baseline_source(pools_from_spec(spec.get("pool", {}), src_seed), m, src_seed, name)
    if kind == "mixed-pool":
        pools = pools_from_spec(spec.get("pool", {}), src_seed)
        return mixed_pool_source(pools, float(spec.get("injected_fraction", 0.0)), m, src_seed, name)
    raise ConfigError(f"source {name!r}: unknown kind {kind!r}")
