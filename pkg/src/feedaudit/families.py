"""Parametric model families for feed content.

Each family describes i.i.d. feed items through a parameter vector ``theta``
living in a closed box (plus, for the categorical family, a band on the
implied last probability). Families are immutable; all randomness comes in
through caller-supplied ``numpy.random.Generator`` objects.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from typing import Any, ClassVar

import numpy as np

from .errors import EmptyFeedError, ParameterDomainError, SingularInformationError

LN2PI = math.log(2.0 * math.pi)
BOUNDARY_ATOL = 1e-12


@dataclass(frozen=True)
class MLEResult:
    theta: np.ndarray
    boundary: bool
    method: str
    loglik: float = float("nan")

    @property
    def flags(self):
        return ["boundary-mle"] if self.boundary else []


@dataclass(frozen=True)
class ModelFamily:
    """Base class. Subclasses fill in the density, score, Fisher information and sampler."""

    domain: tuple = ()
    fixed: dict = field(default_factory=dict)

    id: ClassVar[str] = ""
    sample_space: ClassVar[str] = ""
    default_domain: ClassVar[tuple] = ()

    def __post_init__(self):
        dom = self.default_domain if not self.domain else self.domain
        dom = tuple((float(lo), float(hi)) for lo, hi in dom)
        object.__setattr__(self, "domain", dom)
        object.__setattr__(self, "fixed", dict(self.fixed))
        if len(dom) != self.dimension:
            raise ParameterDomainError(
                f"{self.id}: domain has {len(dom)} intervals, expected {self.dimension}"
            )
        for lo, hi in dom:
            if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
                raise ParameterDomainError(f"{self.id}: degenerate or unbounded interval [{lo}, {hi}]")
        self._check_domain()

    def __hash__(self):
        return hash((self.id, self.domain, tuple(sorted(self.fixed.items()))))

    def __eq__(self, other):
        return (
            type(self) is type(other)
            and self.id == other.id
            and self.domain == other.domain
            and self.fixed == other.fixed
        )

    # -- structure ---------------------------------------------------------

    @property
    def dimension(self) -> int:
        raise NotImplementedError

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.domain])

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.domain])

    def _check_domain(self):
        pass

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "dimension": self.dimension,
            "domain": [list(b) for b in self.domain],
            "fixed": dict(self.fixed),
        }

    def as_theta(self, theta) -> np.ndarray:
        t = np.atleast_1d(np.asarray(theta, dtype=float))
        if t.shape != (self.dimension,):
            raise ParameterDomainError(
                f"{self.id}: parameter has shape {t.shape}, expected ({self.dimension},)"
            )
        return t

    def in_domain(self, theta, atol=0.0) -> bool:
        t = np.atleast_1d(np.asarray(theta, dtype=float))
        if t.shape != (self.dimension,) or not np.all(np.isfinite(t)):
            return False
        return bool(np.all(t >= self.lower - atol) and np.all(t <= self.upper + atol))

    def check(self, theta) -> np.ndarray:
        t = self.as_theta(theta)
        if not np.all(np.isfinite(t)):
            raise ParameterDomainError(f"{self.id}: non-finite parameter {t.tolist()}")
        if not self.in_domain(t):
            raise ParameterDomainError(f"{self.id}: parameter {t.tolist()} outside domain {self.domain}")
        return t

    def project(self, theta) -> np.ndarray:
        return np.clip(np.asarray(theta, dtype=float), self.lower, self.upper)

    def on_boundary(self, theta) -> bool:
        t = np.asarray(theta, dtype=float)
        return bool(
            np.any(np.abs(t - self.lower) <= BOUNDARY_ATOL)
            or np.any(np.abs(t - self.upper) <= BOUNDARY_ATOL)
        )

    def on_boundary_batch(self, thetas) -> np.ndarray:
        t = np.asarray(thetas, dtype=float)
        return np.any(
            (np.abs(t - self.lower) <= BOUNDARY_ATOL) | (np.abs(t - self.upper) <= BOUNDARY_ATOL), axis=1
        )

    def random_interior(self, rng, margin=0.05) -> np.ndarray:
        w = self.upper - self.lower
        return rng.uniform(self.lower + margin * w, self.upper - margin * w)

    # -- sample space ------------------------------------------------------

    def in_support(self, z) -> np.ndarray:
        raise NotImplementedError

    def as_feed(self, items) -> np.ndarray:
        raise NotImplementedError

    def support_probe(self) -> np.ndarray:
        """Finite set of sample-space points used by the regularity spot checks."""
        raise NotImplementedError

    # -- likelihood --------------------------------------------------------

    def log_density(self, theta, z):
        raise NotImplementedError

    def score(self, theta, z) -> np.ndarray:
        """Per-item gradient of the log-density, shape (len(z), r)."""
        raise NotImplementedError

    def loglik(self, theta, feed) -> float:
        with np.errstate(divide="ignore", invalid="ignore"):
            return float(np.sum(self.log_density(theta, feed)))

    def loglik_grad(self, theta, feed) -> np.ndarray:
        raise NotImplementedError

    def sample(self, theta, size, rng) -> np.ndarray:
        raise NotImplementedError

    # -- estimation --------------------------------------------------------

    def closed_form_mle(self, feed):
        """Box-constrained maximiser in closed form, or None when none is available."""
        return None

    def closed_form_mle_batch(self, feeds):
        """Row-wise closed-form MLE for a (T, m) array; rows without one are NaN."""
        return np.array([_or_nan(self.closed_form_mle(f), self.dimension) for f in feeds])

    # -- information -------------------------------------------------------

    def fisher(self, theta) -> np.ndarray:
        """Unchecked Fisher matrix; entries may be inf where the information diverges."""
        raise NotImplementedError

    def inverse_fisher(self, theta) -> np.ndarray:
        """Inverse information (asymptotic covariance), finite on the whole domain."""
        raise NotImplementedError

    def is_singular(self, theta) -> bool:
        raise NotImplementedError

    def fisher_information(self, theta) -> np.ndarray:
        t = self.check(theta)
        if self.is_singular(t):
            raise SingularInformationError(f"{self.id}: Fisher information singular at {t.tolist()}")
        return self.fisher(t)

    def fisher_batch(self, thetas) -> np.ndarray:
        return np.stack([self.fisher(t) for t in thetas])

    def quadratic_form(self, theta, v) -> float:
        """v' I(theta) v, with the limits 0 * inf = 0 and x * inf = inf for x > 0."""
        raise NotImplementedError


def _or_nan(x, r):
    return np.full(r, np.nan) if x is None else x


def _count_term(count, denom):
    # count / denom with 0 / 0 -> 0; keeps the log-likelihood gradient finite on the boundary
    count = np.asarray(count, dtype=float)
    denom = np.asarray(denom, dtype=float)
    out = np.zeros(np.broadcast(count, denom).shape)
    nz = np.broadcast_to(count != 0, out.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[nz] = (np.broadcast_to(count, out.shape) / np.broadcast_to(denom, out.shape))[nz]
    return out


# ---------------------------------------------------------------------------
# Gaussian families
# ---------------------------------------------------------------------------


class _RealLine:
    sample_space = "real"

    def in_support(self, z):
        z = np.asarray(z)
        if z.dtype.kind not in "biuf":
            return np.zeros(z.shape, dtype=bool)
        return np.isfinite(z.astype(float))

    def as_feed(self, items):
        arr = np.asarray(items)
        if arr.dtype.kind not in "biuf":
            raise ValueError("items must be real numbers")
        return arr.astype(float)

    def support_probe(self):
        return np.linspace(-50.0, 50.0, 201)


@dataclass(frozen=True, eq=False)
class GaussianMeanVar(_RealLine, ModelFamily):
    id: ClassVar[str] = "gaussian-mean-var"
    sample_space: ClassVar[str] = "real"
    default_domain: ClassVar[tuple] = ((-10.0, 10.0), (0.01, 25.0))

    @property
    def dimension(self):
        return 2

    def _check_domain(self):
        if self.domain[1][0] < 0:
            raise ParameterDomainError("variance interval must be non-negative")

    def log_density(self, theta, z):
        mu, s2 = np.asarray(theta, dtype=float)
        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -0.5 * (LN2PI + np.log(s2)) - 0.5 * (z - mu) ** 2 / s2
        return np.where(np.isfinite(z), out, -np.inf)

    def score(self, theta, z):
        mu, s2 = theta
        d = np.asarray(z, dtype=float) - mu
        return np.column_stack([d / s2, -0.5 / s2 + 0.5 * d**2 / s2**2])

    def loglik_grad(self, theta, feed):
        mu, s2 = theta
        d = np.asarray(feed, dtype=float) - mu
        m = d.size
        return np.array([d.sum() / s2, -0.5 * m / s2 + 0.5 * np.dot(d, d) / s2**2])

    def sample(self, theta, size, rng):
        mu, s2 = self.check(theta)
        return rng.normal(mu, math.sqrt(s2), size)

    def closed_form_mle(self, feed):
        z = np.asarray(feed, dtype=float)
        lo, hi = self.lower, self.upper
        mu = min(max(float(z.mean()), lo[0]), hi[0])
        s2 = min(max(float(np.mean((z - mu) ** 2)), lo[1]), hi[1])
        return np.array([mu, s2])

    def closed_form_mle_batch(self, feeds):
        z = np.asarray(feeds, dtype=float)
        mu = np.clip(z.mean(axis=1), self.lower[0], self.upper[0])
        s2 = np.clip(np.mean((z - mu[:, None]) ** 2, axis=1), self.lower[1], self.upper[1])
        return np.column_stack([mu, s2])

    def fisher(self, theta):
        _, s2 = np.asarray(theta, dtype=float)
        with np.errstate(divide="ignore"):
            return np.array([[1.0 / s2, 0.0], [0.0, 1.0 / (2.0 * s2 * s2)]])

    def fisher_batch(self, thetas):
        s2 = np.asarray(thetas, dtype=float)[:, 1]
        out = np.zeros((len(s2), 2, 2))
        with np.errstate(divide="ignore"):
            out[:, 0, 0] = 1.0 / s2
            out[:, 1, 1] = 1.0 / (2.0 * s2 * s2)
        return out

    def inverse_fisher(self, theta):
        _, s2 = theta
        return np.diag([s2, 2.0 * s2 * s2])

    def is_singular(self, theta):
        return not theta[1] > 0

    def quadratic_form(self, theta, v):
        _, s2 = theta
        return float(_count_term(v[0] ** 2, s2) + _count_term(v[1] ** 2, 2.0 * s2 * s2))


@dataclass(frozen=True, eq=False)
class GaussianKnownVar(_RealLine, ModelFamily):
    """Gaussian with unknown mean and the variance pinned by ``fixed['sigma2']`` (default 1)."""

    id: ClassVar[str] = "gaussian-known-var"
    sample_space: ClassVar[str] = "real"
    default_domain: ClassVar[tuple] = ((-10.0, 10.0),)

    @property
    def dimension(self):
        return 1

    @property
    def sigma2(self) -> float:
        return float(self.fixed.get("sigma2", 1.0))

    def _check_domain(self):
        if set(self.fixed) - {"sigma2"}:
            raise ParameterDomainError(f"unknown fixed keys {sorted(set(self.fixed) - {'sigma2'})}")
        if not self.sigma2 > 0:
            raise ParameterDomainError("fixed sigma2 must be positive")

    def log_density(self, theta, z):
        (mu,) = np.asarray(theta, dtype=float)
        z = np.asarray(z, dtype=float)
        s2 = self.sigma2
        with np.errstate(invalid="ignore"):
            out = -0.5 * (LN2PI + math.log(s2)) - 0.5 * (z - mu) ** 2 / s2
        return np.where(np.isfinite(z), out, -np.inf)

    def score(self, theta, z):
        return ((np.asarray(z, dtype=float) - theta[0]) / self.sigma2)[:, None]

    def loglik_grad(self, theta, feed):
        return np.array([np.sum(np.asarray(feed, dtype=float) - theta[0]) / self.sigma2])

    def sample(self, theta, size, rng):
        (mu,) = self.check(theta)
        return rng.normal(mu, math.sqrt(self.sigma2), size)

    def closed_form_mle(self, feed):
        return np.clip([float(np.mean(feed))], self.lower, self.upper)

    def closed_form_mle_batch(self, feeds):
        return np.clip(np.asarray(feeds, dtype=float).mean(axis=1), self.lower[0], self.upper[0])[:, None]

    def fisher(self, theta):
        return np.array([[1.0 / self.sigma2]])

    def fisher_batch(self, thetas):
        return np.full((len(thetas), 1, 1), 1.0 / self.sigma2)

    def inverse_fisher(self, theta):
        return np.array([[self.sigma2]])

    def is_singular(self, theta):
        return False

    def quadratic_form(self, theta, v):
        return float(v[0] ** 2 / self.sigma2)


# ---------------------------------------------------------------------------
# Discrete families
# ---------------------------------------------------------------------------


def _integer_support(z, k):
    z = np.asarray(z)
    if z.dtype.kind == "b":
        z = z.astype(int)
    if z.dtype.kind not in "iuf":
        return np.zeros(z.shape, dtype=bool)
    zf = z.astype(float)
    with np.errstate(invalid="ignore"):
        return np.isfinite(zf) & (zf == np.round(zf)) & (zf >= 0) & (zf <= k - 1)


@dataclass(frozen=True, eq=False)
class Bernoulli(ModelFamily):
    id: ClassVar[str] = "bernoulli"
    sample_space: ClassVar[str] = "bit"
    default_domain: ClassVar[tuple] = ((0.0, 1.0),)

    @property
    def dimension(self):
        return 1

    def _check_domain(self):
        lo, hi = self.domain[0]
        if lo < 0 or hi > 1:
            raise ParameterDomainError("bernoulli domain must lie inside [0, 1]")

    def in_support(self, z):
        return _integer_support(z, 2)

    def as_feed(self, items):
        arr = np.asarray(items)
        if not np.all(_integer_support(arr, 2)):
            raise ValueError("items must be 0 or 1")
        return arr.astype(int)

    def support_probe(self):
        return np.array([0, 1])

    def log_density(self, theta, z):
        (p,) = np.asarray(theta, dtype=float)
        z = np.asarray(z)
        ok = _integer_support(z, 2)
        zi = np.where(ok, z, 0).astype(int)
        with np.errstate(divide="ignore"):
            lp = np.where(zi == 1, np.log(p), np.log1p(-p))
        return np.where(ok, lp, -np.inf)

    def score(self, theta, z):
        (p,) = theta
        z = np.asarray(z).astype(int)
        with np.errstate(divide="ignore"):
            return np.where(z == 1, 1.0 / p, -1.0 / (1.0 - p))[:, None]

    def loglik_grad(self, theta, feed):
        (p,) = theta
        n1 = int(np.sum(feed))
        n0 = np.size(feed) - n1
        return np.array([_count_term(n1, p) - _count_term(n0, 1.0 - p)]).reshape(1)

    def sample(self, theta, size, rng):
        (p,) = self.check(theta)
        return (rng.random(size) < p).astype(int)

    def closed_form_mle(self, feed):
        return np.clip([float(np.mean(feed))], self.lower, self.upper)

    def closed_form_mle_batch(self, feeds):
        return np.clip(np.asarray(feeds, dtype=float).mean(axis=1), self.lower[0], self.upper[0])[:, None]

    def fisher(self, theta):
        (p,) = np.asarray(theta, dtype=float)
        with np.errstate(divide="ignore"):
            return np.array([[1.0 / (p * (1.0 - p))]])

    def fisher_batch(self, thetas):
        p = np.asarray(thetas, dtype=float)[:, 0]
        with np.errstate(divide="ignore"):
            return (1.0 / (p * (1.0 - p)))[:, None, None]

    def inverse_fisher(self, theta):
        (p,) = theta
        return np.array([[p * (1.0 - p)]])

    def is_singular(self, theta):
        return not 0.0 < theta[0] < 1.0

    def quadratic_form(self, theta, v):
        (p,) = theta
        return float(_count_term(v[0] ** 2, p * (1.0 - p)))


@dataclass(frozen=True, eq=False)
class Categorical(ModelFamily):
    """k-symbol categorical; the first k-1 probabilities are free, the last is implied.

    The domain box bounds the free coordinates; the implied last probability must
    lie in the band [min lower bound, max upper bound] of that box.
    """

    k: int = 3
    id: ClassVar[str] = "categorical-k"
    sample_space: ClassVar[str] = "symbol"

    def __post_init__(self):
        if self.k < 2:
            raise ParameterDomainError("categorical family needs k >= 2")
        if not self.domain:
            object.__setattr__(self, "domain", tuple((0.0, 1.0) for _ in range(self.k - 1)))
        super().__post_init__()

    @property
    def family_id(self):
        return f"categorical-{self.k}"

    @property
    def dimension(self):
        return self.k - 1

    def __hash__(self):
        return hash((self.family_id, self.domain))

    def __eq__(self, other):
        return isinstance(other, Categorical) and self.k == other.k and self.domain == other.domain

    def to_dict(self):
        d = super().to_dict()
        d["id"] = self.family_id
        return d

    @property
    def band(self):
        return float(self.lower.min()), float(self.upper.max())

    def _check_domain(self):
        if np.any(self.lower < 0) or np.any(self.upper > 1):
            raise ParameterDomainError("categorical domain must lie inside [0, 1]")
        if self.fixed:
            raise ParameterDomainError("categorical family takes no fixed parameters")
        blo, bhi = self.band
        if self.lower.sum() > 1 - blo or self.upper.sum() < 1 - bhi:
            raise ParameterDomainError("categorical domain box does not meet the probability simplex")

    def full_probs(self, theta):
        t = np.asarray(theta, dtype=float)
        return np.append(t, 1.0 - t.sum())

    def in_domain(self, theta, atol=0.0):
        if not super().in_domain(theta, atol):
            return False
        last = 1.0 - float(np.sum(theta))
        blo, bhi = self.band
        return blo - atol - 1e-12 <= last <= bhi + atol + 1e-12

    def project(self, theta):
        y = np.asarray(theta, dtype=float)
        lo, hi = self.lower, self.upper
        blo, bhi = self.band
        smin, smax = 1.0 - bhi, 1.0 - blo

        def proj(lam):
            return np.clip(y - lam, lo, hi)

        s0 = proj(0.0).sum()
        if smin <= s0 <= smax:
            return proj(0.0)
        target = smax if s0 > smax else smin
        # sum of clip(y - lam) is non-increasing in lam
        a, b = -2.0 - np.abs(y).max(), 2.0 + np.abs(y).max()
        for _ in range(200):
            mid = 0.5 * (a + b)
            if proj(mid).sum() > target:
                a = mid
            else:
                b = mid
            if b - a < 1e-15:
                break
        x = proj(0.5 * (a + b))
        return x

    def on_boundary(self, theta):
        if super().on_boundary(theta):
            return True
        last = 1.0 - float(np.sum(theta))
        blo, bhi = self.band
        return abs(last - blo) <= BOUNDARY_ATOL or abs(last - bhi) <= BOUNDARY_ATOL

    def on_boundary_batch(self, thetas):
        last = 1.0 - np.asarray(thetas, dtype=float).sum(axis=1)
        blo, bhi = self.band
        return (
            super().on_boundary_batch(thetas)
            | (np.abs(last - blo) <= BOUNDARY_ATOL)
            | (np.abs(last - bhi) <= BOUNDARY_ATOL)
        )

    def random_interior(self, rng, margin=0.05):
        for _ in range(10_000):
            t = super().random_interior(rng, margin)
            if self.in_domain(t) and not self.on_boundary(t):
                return t
        return self.project(rng.dirichlet(np.ones(self.k))[:-1])

    def in_support(self, z):
        return _integer_support(z, self.k)

    def as_feed(self, items):
        arr = np.asarray(items)
        if not np.all(_integer_support(arr, self.k)):
            raise ValueError(f"items must be symbols 0..{self.k - 1}")
        return arr.astype(int)

    def support_probe(self):
        return np.arange(self.k)

    def log_density(self, theta, z):
        probs = self.full_probs(theta)
        z = np.asarray(z)
        ok = _integer_support(z, self.k)
        zi = np.where(ok, z, 0).astype(int)
        with np.errstate(divide="ignore"):
            lp = np.log(probs)[zi]
        return np.where(ok, lp, -np.inf)

    def score(self, theta, z):
        probs = self.full_probs(theta)
        z = np.asarray(z).astype(int)
        out = np.zeros((z.size, self.k - 1))
        with np.errstate(divide="ignore"):
            last = z == self.k - 1
            out[last, :] = -1.0 / probs[-1]
            rows = np.nonzero(~last)[0]
            out[rows, z[rows]] = 1.0 / probs[z[rows]]
        return out

    def counts(self, feed):
        return np.bincount(np.asarray(feed, dtype=int), minlength=self.k)

    def loglik_grad(self, theta, feed):
        probs = self.full_probs(theta)
        n = self.counts(feed)
        return _count_term(n[:-1], probs[:-1]) - _count_term(n[-1], probs[-1])

    def sample(self, theta, size, rng):
        probs = np.clip(self.full_probs(self.check(theta)), 0.0, None)
        return rng.choice(self.k, size=size, p=probs / probs.sum())

    def closed_form_mle(self, feed):
        n = self.counts(feed)
        freq = n[:-1] / n.sum()
        return freq if self.in_domain(freq) else None

    def closed_form_mle_batch(self, feeds):
        feeds = np.asarray(feeds, dtype=int)
        T, m = feeds.shape
        counts = np.zeros((T, self.k))
        np.add.at(counts, (np.repeat(np.arange(T), m), feeds.ravel()), 1.0)
        freq = counts[:, :-1] / m
        ok = np.array([self.in_domain(f) for f in freq])
        freq[~ok] = np.nan
        return freq

    def fisher(self, theta):
        probs = self.full_probs(theta)
        with np.errstate(divide="ignore"):
            return np.diag(1.0 / probs[:-1]) + 1.0 / probs[-1]

    def inverse_fisher(self, theta):
        t = np.asarray(theta, dtype=float)
        return np.diag(t) - np.outer(t, t)

    def is_singular(self, theta):
        return bool(np.any(self.full_probs(theta) <= 0))

    def quadratic_form(self, theta, v):
        probs = self.full_probs(theta)
        v = np.asarray(v, dtype=float)
        return float(np.sum(_count_term(v**2, probs[:-1])) + _count_term(v.sum() ** 2, probs[-1]))


# ---------------------------------------------------------------------------
# construction / serialisation
# ---------------------------------------------------------------------------

_SIMPLE = {cls.id: cls for cls in (GaussianMeanVar, GaussianKnownVar, Bernoulli)}
_CATEGORICAL = re.compile(r"^categorical-(\d+)$")
FAMILY_IDS = tuple(_SIMPLE) + ("categorical-<k>",)


def family_id(family: ModelFamily) -> str:
    return family.family_id if isinstance(family, Categorical) else family.id


def make_family(id: str, domain=None, fixed=None) -> ModelFamily:
    domain = tuple(tuple(b) for b in domain) if domain else ()
    fixed = dict(fixed or {})
    if id in _SIMPLE:
        return _SIMPLE[id](domain=domain, fixed=fixed)
    match = _CATEGORICAL.match(id)
    if match:
        return Categorical(domain=domain, fixed=fixed, k=int(match.group(1)))
    raise ParameterDomainError(f"unknown family {id!r}; known: {', '.join(FAMILY_IDS)}")


def family_from_dict(d: dict[str, Any]) -> ModelFamily:
    unknown = set(d) - {"id", "dimension", "domain", "fixed"}
    if unknown:
        raise ParameterDomainError(f"unknown family descriptor keys {sorted(unknown)}")
    if "id" not in d:
        raise ParameterDomainError("family descriptor needs an 'id'")
    fam = make_family(d["id"], d.get("domain"), d.get("fixed"))
    if "dimension" in d and int(d["dimension"]) != fam.dimension:
        raise ParameterDomainError(
            f"descriptor dimension {d['dimension']} does not match {fam.dimension} for {d['id']}"
        )
    return fam


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def log_density(family: ModelFamily, theta, z):
    """log p(z; theta). Items outside the support give -inf; theta outside the domain raises."""
    t = family.check(theta)
    out = family.log_density(t, z)
    return float(out) if np.ndim(out) == 0 else out


def sample_feed(family: ModelFamily, theta, m: int, rng) -> np.ndarray:
    if m < 1:
        raise EmptyFeedError("feed length m must be at least 1")
    return family.sample(theta, int(m), rng)


def _validated_feed(family, feed):
    z = np.asarray(feed)
    if z.ndim != 1 or z.size == 0:
        raise EmptyFeedError("feed must be a non-empty 1-D sequence")
    if not np.all(family.in_support(z)):
        raise ValueError(f"feed contains items outside the {family.sample_space} sample space")
    return family.as_feed(z)


def mle(family: ModelFamily, feed, method: str = "auto") -> MLEResult:
    """Maximum-likelihood estimate over the family's domain.

    ``method`` is "auto" (closed form when one exists, projected ascent otherwise),
    "closed" or "numerical".
    """
    z = _validated_feed(family, feed)
    theta = None
    used = method
    if method in ("auto", "closed"):
        theta = family.closed_form_mle(z)
        used = "closed"
        if theta is None and method == "closed":
            raise ValueError(f"{family_id(family)}: no closed-form MLE inside the domain for this feed")
    if theta is None:
        return numerical_mle(family, z)
    theta = np.asarray(theta, dtype=float)
    return MLEResult(theta, family.on_boundary(theta), used, family.loglik(theta, z))


def numerical_mle(family, feed, restarts=10, max_iter=500, tol=1e-9, seed=0) -> MLEResult:
    """Projected, Fisher-preconditioned gradient ascent with random restarts.

    Each step moves along I(theta)^-1 * grad, projects onto the domain and halves the
    step until the log-likelihood does not decrease. A restart stops when the
    projected step is shorter than ``tol`` or after ``max_iter`` iterations. The best
    restart wins on log-likelihood, ties going to the lexicographically smallest theta.
    """
    z = np.asarray(feed)
    m = z.size
    rng = np.random.default_rng(seed)
    candidates = []
    for _ in range(restarts):
        theta = family.project(family.random_interior(rng))
        ll = family.loglik(theta, z)
        for _ in range(max_iter):
            with np.errstate(divide="ignore", invalid="ignore"):
                g = family.loglik_grad(theta, z) / m
                d = family.inverse_fisher(theta) @ g
            if not np.all(np.isfinite(d)):
                d = np.nan_to_num(g, nan=0.0, posinf=1.0, neginf=-1.0)
            if np.linalg.norm(family.project(theta + d) - theta) < tol:
                break
            t = 1.0
            cand, llc = theta, ll
            while t > 1e-12:
                cand = family.project(theta + t * d)
                llc = family.loglik(cand, z)
                if llc >= ll:
                    break
                t *= 0.5
            else:
                break
            moved = np.linalg.norm(cand - theta)
            theta, ll = cand, llc
            if moved < tol:
                break
        candidates.append((ll, tuple(theta)))
    best_ll = max(c[0] for c in candidates)
    slack = 1e-12 * max(1.0, abs(best_ll)) if math.isfinite(best_ll) else 0.0
    tied = sorted(c[1] for c in candidates if c[0] >= best_ll - slack)
    theta = np.array(tied[0])
    return MLEResult(theta, family.on_boundary(theta), "numerical", best_ll)


def mle_batch(family: ModelFamily, feeds) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise MLE for a (T, m) array of feeds. Returns (thetas, boundary flags)."""
    feeds = np.asarray(feeds)
    thetas = np.asarray(family.closed_form_mle_batch(feeds), dtype=float)
    missing = np.nonzero(np.any(np.isnan(thetas), axis=1))[0]
    for i in missing:
        thetas[i] = numerical_mle(family, feeds[i]).theta
    return thetas, family.on_boundary_batch(thetas)


def fisher_information(family: ModelFamily, theta) -> np.ndarray:
    return family.fisher_information(theta)


# ---------------------------------------------------------------------------
# regularity diagnostics
# ---------------------------------------------------------------------------


@dataclass
class ConditionCheck:
    name: str
    passed: bool
    witness: list | None = None
    detail: str = ""


@dataclass
class RegularityReport:
    family: dict
    checks: list[ConditionCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name) -> ConditionCheck:
        return next(c for c in self.checks if c.name == name)

    def to_dict(self):
        return {
            "family": self.family,
            "passed": self.passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "witness": c.witness, "detail": c.detail}
                for c in self.checks
            ],
        }


def domain_grid(family: ModelFamily, points: int = 11, interior: bool = False) -> np.ndarray:
    axes = []
    for lo, hi in family.domain:
        ax = np.linspace(lo, hi, points + 2)[1:-1] if interior else np.linspace(lo, hi, points)
        axes.append(ax)
    grid = [np.array(p) for p in itertools.product(*axes)]
    grid = [g for g in grid if family.in_domain(g)]
    if interior:
        grid = [g for g in grid if not family.on_boundary(g)]
    return np.array(grid)


def validate_regularity(family: ModelFamily, points: int = 11) -> RegularityReport:
    """Spot-check the machine-checkable regularity conditions on a parameter grid.

    Support independence and identifiability are checked on interior grid points.
    The Fisher check covers the full grid, boundary included, because the audit
    evaluates the information at clamped estimates that can sit on the boundary.
    """
    checks = []
    lo, hi = family.lower, family.upper
    bounded = bool(np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(lo < hi))
    checks.append(ConditionCheck("bounded-domain", bounded, detail=f"box {list(family.domain)}"))

    full = domain_grid(family, points)
    inner = domain_grid(family, points, interior=True)

    convex_witness = None
    for a, b in itertools.combinations(full, 2):
        if not family.in_domain(0.5 * (a + b), atol=1e-12):
            convex_witness = [a.tolist(), b.tolist()]
            break
    checks.append(ConditionCheck("convex-domain", convex_witness is None, convex_witness,
                                 "midpoints of grid pairs stay in the domain"))

    probe = family.support_probe()
    ref = None
    support_witness = None
    for t in inner:
        supp = np.isfinite(family.log_density(t, probe))
        if ref is None:
            ref = supp
        elif not np.array_equal(supp, ref):
            support_witness = t.tolist()
            break
    checks.append(ConditionCheck("support-independent", support_witness is None, support_witness,
                                 f"support probed at {probe.size} sample-space points"))

    ident_witness = None
    dens = np.array([family.log_density(t, probe) for t in inner])
    for i, j in itertools.combinations(range(len(inner)), 2):
        if np.array_equal(dens[i], dens[j]):
            ident_witness = [inner[i].tolist(), inner[j].tolist()]
            break
    checks.append(ConditionCheck("identifiable", ident_witness is None, ident_witness,
                                 "distinct grid points give distinct densities on the probe"))

    fisher_witness = None
    detail = "Fisher information positive-definite at every grid point"
    for t in full:
        try:
            info = family.fisher_information(t)
        except SingularInformationError as exc:
            fisher_witness, detail = t.tolist(), str(exc)
            break
        eig = np.linalg.eigvalsh(0.5 * (info + info.T))
        if not np.all(np.isfinite(info)) or eig.min() <= 0:
            fisher_witness, detail = t.tolist(), f"min eigenvalue {eig.min():.3g}"
            break
    checks.append(ConditionCheck("fisher-positive-definite", fisher_witness is None, fisher_witness, detail))

    return RegularityReport(family.to_dict(), checks)
