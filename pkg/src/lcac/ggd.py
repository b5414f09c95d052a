"""Generalized Gaussian distribution: density, distribution function,
sampling, moment/shape estimators and the synthesized-copy aggregation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize, special

from .errors import InsufficientDataError, InvalidInputError, InvalidProfileError

GAMMA_MIN, GAMMA_MAX = 0.1, 10.0


@dataclass(frozen=True)
class GgdParams:
    mu: float
    sigma2: float
    gamma: float

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise InvalidInputError(f"variance must be positive, got {self.sigma2}")
        if not GAMMA_MIN <= self.gamma <= GAMMA_MAX:
            raise InvalidInputError(f"shape {self.gamma} outside [{GAMMA_MIN}, {GAMMA_MAX}]")

    @property
    def eta(self) -> float:
        g = self.gamma
        return float(np.sqrt(np.exp(special.gammaln(3 / g) - special.gammaln(1 / g)) / self.sigma2))


def pdf(x, p: GgdParams):
    g, eta = p.gamma, p.eta
    z = np.abs(np.asarray(x, dtype=float) - p.mu) * eta
    log_norm = np.log(g * eta / 2) - special.gammaln(1 / g)
    return np.exp(log_norm - z**g)


def cdf(x, p: GgdParams):
    d = np.asarray(x, dtype=float) - p.mu
    z = (np.abs(d) * p.eta) ** p.gamma
    sign = np.where(d >= 0, 1.0, -1.0)
    return 0.5 + sign * special.gammainc(1 / p.gamma, z) / 2


def sample(p: GgdParams, rng: np.random.Generator, size=None):
    """Draw via ``mu + sign * G**(1/gamma) / eta`` with ``G ~ Gamma(1/gamma, 1)``."""
    g = rng.gamma(1 / p.gamma, 1.0, size=size)
    sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    return p.mu + sign * g ** (1 / p.gamma) / p.eta


def centered_noise(sigma2, gamma, rng: np.random.Generator) -> np.ndarray:
    """Zero-mean GGD draws with per-element variance and shape arrays."""
    sigma2 = np.asarray(sigma2, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    shape = np.broadcast(sigma2, gamma).shape
    g = rng.gamma(1 / gamma, 1.0, size=shape)
    sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    eta = np.sqrt(np.exp(special.gammaln(3 / gamma) - special.gammaln(1 / gamma)) / sigma2)
    return sign * g ** (1 / gamma) / eta


def estimate_mean(samples) -> float:
    y = np.asarray(samples, dtype=float)
    if y.size == 0:
        raise InsufficientDataError("no samples")
    return float(y.mean())


def estimate_variance(samples) -> float:
    y = np.asarray(samples, dtype=float)
    if y.size < 2:
        raise InsufficientDataError("variance needs at least two samples")
    return float(y.var(ddof=1))


def ratio_function(gamma):
    """``Gamma(1/g) Gamma(3/g) / Gamma(2/g)**2``."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g <= 0):
        raise InvalidInputError("shape must be positive")
    out = np.exp(special.gammaln(1 / g) + special.gammaln(3 / g) - 2 * special.gammaln(2 / g))
    return float(out) if out.ndim == 0 else out


_SEARCH_GRID = np.round(np.arange(GAMMA_MIN, GAMMA_MAX + 5e-4, 1e-3), 3)


def invert_ratio(rho: float, method: str = "bisect", tol: float = 1e-10) -> float:
    """Shape with ``ratio_function(shape) == rho``, clamped to the search range.

    ``method="grid"`` is the exhaustive scan at 1e-3 resolution.
    """
    if method == "grid":
        r = ratio_function(_SEARCH_GRID)
        return float(_SEARCH_GRID[np.argmin(np.abs(r - rho))])
    if method != "bisect":
        raise InvalidInputError(f"unknown shape search method {method!r}")
    # r is strictly decreasing on the range
    if rho >= ratio_function(GAMMA_MIN):
        return GAMMA_MIN
    if rho <= ratio_function(GAMMA_MAX):
        return GAMMA_MAX
    return float(optimize.bisect(lambda g: ratio_function(g) - rho, GAMMA_MIN, GAMMA_MAX, xtol=tol))


def estimate_shape(samples, mu: float, sigma2: float, method: str = "bisect", mad_divisor: str = "J") -> float:
    """Moment-ratio shape estimate ``r^-1(sigma2 / mean|y - mu|**2)``.

    ``mad_divisor="J-1"`` normalizes the absolute deviation sum by J-1, the
    form used for synthesized-copy aggregates.
    """
    y = np.asarray(samples, dtype=float)
    if y.size < 2:
        raise InsufficientDataError("shape estimation needs at least two samples")
    denom = y.size if mad_divisor == "J" else y.size - 1
    mad = np.abs(y - mu).sum() / denom
    if mad <= 0 or sigma2 <= 0:
        raise InsufficientDataError("degenerate samples: zero deviation")
    return invert_ratio(sigma2 / mad**2, method=method)


@dataclass(frozen=True)
class SampleSet:
    """Received observations keyed by nominal constellation gray."""

    observations: dict[float, np.ndarray]

    @property
    def J(self) -> int:
        sizes = {len(v) for v in self.observations.values()}
        return sizes.pop() if len(sizes) == 1 else -1


@dataclass(frozen=True)
class ConstellationProfile:
    points: tuple[float, ...]
    params: tuple[GgdParams, ...]
    provenance: str = "synthetic"
    goodness_of_fit: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.points) != len(self.params):
            raise InvalidProfileError("profile needs one parameter set per constellation point")

    @property
    def M(self) -> int:
        return len(self.points)

    def __getitem__(self, x: float) -> GgdParams:
        for px, p in zip(self.points, self.params):
            if px == x:
                return p
        raise InvalidProfileError(f"constellation point {x} not in profile")

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        mu = np.array([p.mu for p in self.params])
        s2 = np.array([p.sigma2 for p in self.params])
        g = np.array([p.gamma for p in self.params])
        return mu, s2, g

    def covers(self, constellation) -> bool:
        return tuple(float(x) for x in constellation) == tuple(float(x) for x in self.points)

    def to_dict(self) -> dict:
        return {
            "provenance": self.provenance,
            "M": self.M,
            "rows": [
                {"x": x, "mu": p.mu, "sigma2": p.sigma2, "gamma": p.gamma}
                for x, p in zip(self.points, self.params)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConstellationProfile":
        rows = d["rows"]
        if "M" in d and d["M"] != len(rows):
            raise InvalidProfileError("profile M does not match its row count")
        return cls(
            tuple(float(r["x"]) for r in rows),
            tuple(GgdParams(float(r["mu"]), float(r["sigma2"]), float(r["gamma"])) for r in rows),
            d.get("provenance", "unknown"),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "ConstellationProfile":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _fit_stats(y: np.ndarray, p: GgdParams) -> dict:
    """Kolmogorov-Smirnov distance between the samples and the fitted law."""
    ys = np.sort(y)
    F = cdf(ys, p)
    n = len(ys)
    ks = max(np.max(np.arange(1, n + 1) / n - F), np.max(F - np.arange(n) / n))
    return {"ks": float(ks), "J": n}


def estimate_profile(samples: SampleSet, constellation, provenance: str = "estimated", method: str = "bisect"):
    params, gof = [], {}
    for x in constellation:
        y = samples.observations.get(float(x))
        if y is None or len(y) < 2:
            raise InsufficientDataError(f"constellation {x} needs at least two samples")
        y = np.asarray(y, dtype=float)
        mu = estimate_mean(y)
        s2 = estimate_variance(y)
        p = GgdParams(mu, s2, estimate_shape(y, mu, s2, method=method))
        params.append(p)
        gof[float(x)] = _fit_stats(y, p)
    return ConstellationProfile(tuple(float(x) for x in constellation), tuple(params), provenance, gof)


def sc_aggregate(captures: list[SampleSet], constellation, provenance: str = "synthesized") -> ConstellationProfile:
    """Average each observation over the captures, then estimate mean,
    variance (J-1) and shape with the J-1 absolute-deviation normalization."""
    if not captures:
        raise InsufficientDataError("no captures")
    params = []
    for x in constellation:
        x = float(x)
        try:
            stack = [np.asarray(c.observations[x], dtype=float) for c in captures]
        except KeyError as exc:
            raise InsufficientDataError(f"constellation {x} missing from a capture") from exc
        if len({len(s) for s in stack}) != 1:
            raise InvalidInputError("capture sets are misaligned")
        avg = np.mean(stack, axis=0)
        mu = estimate_mean(avg)
        s2 = estimate_variance(avg)
        params.append(GgdParams(mu, s2, estimate_shape(avg, mu, s2, mad_divisor="J-1")))
    return ConstellationProfile(tuple(float(x) for x in constellation), tuple(params), provenance)
