"""Synthesized-copy prediction functions, theoretical symbol/authentication
BERs and the decoded-BER model."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .auth import AuthConfig
from .errors import ExtrapolationRangeError, InsufficientDataError, InvalidInputError, InvalidProfileError
from .ggd import GAMMA_MAX, GAMMA_MIN, ConstellationProfile, GgdParams, cdf, centered_noise
from .layout import DEFAULT_SPEC, BarcodeSpec, symbol_cells

DEFAULT_RANGE = (1.0, 32.0)
_B_GRID = np.round(np.arange(-3.0, 3.0 + 5e-4, 1e-3), 3)


def _series(series, name: str):
    pairs = sorted((float(n), float(v)) for n, v in (series.items() if isinstance(series, dict) else series))
    n = np.array([p[0] for p in pairs])
    v = np.array([p[1] for p in pairs])
    if np.any(n <= 0):
        raise InvalidInputError(f"{name}: sample counts must be positive")
    return n, v


def fit_mean_power(series) -> tuple[float, float]:
    """``mu = a * n**b`` by least squares on ``log mu``."""
    n, mu = _series(series, "mean series")
    if len(n) < 2:
        raise InsufficientDataError("mean fit needs at least two points")
    if np.any(mu <= 0):
        raise InvalidInputError("mean fit needs positive values")
    b, log_a = np.polyfit(np.log(n), np.log(mu), 1)
    return float(np.exp(log_a)), float(b)


def fit_variance_power(series, positive_on: tuple[float, float] | None = DEFAULT_RANGE) -> tuple[float, float, float]:
    """``s2 = a * n**b + c``: grid over ``b`` in [-3, 3] (step 1e-3) with a
    linear least-squares solve for ``(a, c)`` at each grid point.

    With ``positive_on`` set, candidates whose curve is not strictly positive
    over that range are discarded.
    """
    n, s2 = _series(series, "variance series")
    if len(n) < 3:
        raise InsufficientDataError("variance fit needs at least three points")
    X = n[None, :] ** _B_GRID[:, None]  # (grid, points)
    m = len(n)
    sx, sy = X.sum(1), s2.sum()
    sxx, sxy = (X * X).sum(1), X @ s2
    det = m * sxx - sx * sx
    ok = np.abs(det) > 1e-9 * np.maximum(m * sxx, 1.0)
    det = np.where(ok, det, 1.0)
    a = (m * sxy - sx * sy) / det
    c = (sy - a * sx) / m
    sse = ((a[:, None] * X + c[:, None] - s2[None, :]) ** 2).sum(1)
    if positive_on is not None:
        lo, hi = positive_on
        # a*f**b + c is monotone in f, so the endpoints bound it
        ok &= (a * lo**_B_GRID + c > 0) & (a * hi**_B_GRID + c > 0)
    if not ok.any():
        raise InvalidInputError("no admissible variance fit")
    sse = np.where(ok, sse, np.inf)
    i = int(np.argmin(sse))
    return float(a[i]), float(_B_GRID[i]), float(c[i])


def fit_shape_avg(series) -> float:
    vals = [float(v) for _, v in (series.items() if isinstance(series, dict) else series)]
    if not vals:
        raise InsufficientDataError("shape fit needs at least one point")
    return float(np.mean(vals))


@dataclass(frozen=True)
class PointModel:
    a_mu: float
    b_mu: float
    a_sigma: float
    b_sigma: float
    c_sigma: float
    gamma_bar: float

    def mean(self, f):
        return self.a_mu * np.power(f, self.b_mu)

    def variance(self, f):
        return self.a_sigma * np.power(f, self.b_sigma) + self.c_sigma


@dataclass(frozen=True)
class PredictionModel:
    points: tuple[float, ...]
    constants: tuple[PointModel, ...]
    fit_range: tuple[float, float] = (1.0, 8.0)
    extrapolation_range: tuple[float, float] = DEFAULT_RANGE
    provenance: str = "fitted"

    def __post_init__(self):
        lo, hi = self.extrapolation_range
        for x, pm in zip(self.points, self.constants):
            if not GAMMA_MIN <= pm.gamma_bar <= GAMMA_MAX:
                raise InvalidProfileError(f"gamma_bar at {x} outside [{GAMMA_MIN}, {GAMMA_MAX}]")
            if min(pm.variance(lo), pm.variance(hi)) <= 0:
                raise ExtrapolationRangeError(f"predicted variance at {x} is not positive over [{lo}, {hi}]")

    def __getitem__(self, x: float) -> PointModel:
        return self.constants[self.points.index(float(x))]

    def to_dict(self) -> dict:
        return {
            "provenance": self.provenance,
            "constellation": {
                str(x): {
                    "a_mu": pm.a_mu, "b_mu": pm.b_mu, "a_sigma": pm.a_sigma,
                    "b_sigma": pm.b_sigma, "c_sigma": pm.c_sigma, "gamma_bar": pm.gamma_bar,
                }
                for x, pm in zip(self.points, self.constants)
            },
            "fit_range": list(self.fit_range),
            "extrapolation_range": list(self.extrapolation_range),
        }

    @classmethod
    def from_dict(cls, d: dict, default_gamma: float = 2.0) -> "PredictionModel":
        items = sorted(d["constellation"].items(), key=lambda kv: float(kv[0]))
        pts, consts = [], []
        for x, row in items:
            pts.append(float(x))
            consts.append(
                PointModel(
                    float(row["a_mu"]), float(row["b_mu"]), float(row["a_sigma"]), float(row["b_sigma"]),
                    float(row["c_sigma"]), float(row.get("gamma_bar", default_gamma)),
                )
            )
        return cls(
            tuple(pts), tuple(consts),
            tuple(d.get("fit_range", (1.0, 8.0))),
            tuple(d.get("extrapolation_range", DEFAULT_RANGE)),
            d.get("provenance", "unknown"),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "PredictionModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_prediction_model(series: dict[int, ConstellationProfile], provenance: str = "fitted") -> PredictionModel:
    """Fit every constellation point of an ``n_s -> profile`` series."""
    if len(series) < 3:
        raise InsufficientDataError("need profiles for at least three n_s values")
    ns = sorted(series)
    points = series[ns[0]].points
    consts = []
    for x in points:
        rows = [(n, series[n][x]) for n in ns]
        a_mu, b_mu = fit_mean_power([(n, p.mu) for n, p in rows])
        a_s, b_s, c_s = fit_variance_power([(n, p.sigma2) for n, p in rows])
        consts.append(PointModel(a_mu, b_mu, a_s, b_s, c_s, fit_shape_avg([(n, p.gamma) for n, p in rows])))
    return PredictionModel(tuple(points), tuple(consts), (float(ns[0]), float(ns[-1])), DEFAULT_RANGE, provenance)


def predict_profile(model: PredictionModel, f: float) -> ConstellationProfile:
    lo, hi = model.extrapolation_range
    if not lo <= f <= hi:
        raise ExtrapolationRangeError(f"f={f} outside the extrapolation range [{lo}, {hi}]")
    params = []
    for x, pm in zip(model.points, model.constants):
        s2 = float(pm.variance(f))
        if s2 <= 0:
            raise ExtrapolationRangeError(f"predicted variance {s2:.4g} at x={x}, f={f} is not positive")
        params.append(GgdParams(float(pm.mean(f)), s2, pm.gamma_bar))
    return ConstellationProfile(model.points, tuple(params), f"predicted f={f:g} from {model.provenance}")


@dataclass(frozen=True)
class DemodulationRule:
    """Decision thresholds and the error weight ``alpha[i, j]`` charged when
    point ``i`` lands in cell ``j`` (both 0-based)."""

    thresholds: tuple[float, ...]
    alpha: np.ndarray = field(compare=False)
    mode: str = "printed"

    @classmethod
    def from_spec(cls, spec: BarcodeSpec = DEFAULT_SPEC, mode: str = "printed") -> "DemodulationRule":
        m = spec.modulation_order
        i, j = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
        if mode == "printed":
            # 1/2 when |j+1-i| <= 2 (1-based point, 0-based cell), else 1
            alpha = np.where(np.abs(j - i) <= 2, 0.5, 1.0)
        elif mode == "bit_exact":
            bm = np.array(spec.bit_map)
            alpha = (bm[:, None, :] != bm[None, :, :]).sum(-1) / spec.bits_per_symbol
        else:
            raise InvalidInputError(f"unknown demodulation rule mode {mode!r}")
        alpha = alpha.astype(float)
        np.fill_diagonal(alpha, 0.0)
        return cls(tuple(spec.thresholds), alpha, mode)

    @property
    def M(self) -> int:
        return len(self.thresholds) - 1


def cell_probabilities(p: GgdParams, rule: DemodulationRule) -> np.ndarray:
    """Mass of each decision cell. The outer cells extend to +-inf because
    the channel clamps to [0, 255] and the clamped values stay in them."""
    edges = np.array(rule.thresholds, dtype=float)
    edges[0], edges[-1] = -np.inf, np.inf
    F = cdf(edges, p)
    return np.diff(F)


def symbol_ber(profile: ConstellationProfile, rule: DemodulationRule, i: int) -> float:
    """Weighted error probability of constellation point ``i`` (0-based)."""
    if profile.M != rule.M:
        raise InvalidProfileError("profile and demodulation rule disagree on M")
    return float(rule.alpha[i] @ cell_probabilities(profile.params[i], rule))


def raw_auth_ber(profile: ConstellationProfile, rule: DemodulationRule) -> float:
    """Mean symbol BER, assuming every point is used equally often."""
    return float(np.mean([symbol_ber(profile, rule, i) for i in range(profile.M)]))


def simulate_symbol_ber(
    profile: ConstellationProfile, rule: DemodulationRule, n_symbols: int, rng: np.random.Generator,
    spec: BarcodeSpec = DEFAULT_SPEC,
) -> float:
    """Monte Carlo counterpart of :func:`raw_auth_ber`: uniform symbols,
    GGD noise, clamping, hard decisions and alpha-weighted errors."""
    idx = rng.integers(0, profile.M, n_symbols)
    mu, s2, g = profile.arrays()
    y = np.clip(mu[idx] + centered_noise(s2[idx], g[idx], rng), 0, 255)
    cells = symbol_cells(y, spec) - 1
    return float(rule.alpha[idx, cells].mean())


def decoded_auth_ber(
    eps_a2: float, cfg: AuthConfig, trials: int = 100_000, rng: np.random.Generator | None = None
) -> tuple[float, float]:
    """Monte Carlo i.i.d. model: ``e ~ Binomial(n_a, eps_a2)``; a trial
    contributes 0 when ``e <= t_a`` and ``e / n_a`` otherwise.
    Returns ``(mean, P(eps_a1 = 0))``."""
    if not 0 <= eps_a2 <= 1:
        raise InvalidInputError("eps_a2 must lie in [0, 1]")
    rng = rng if rng is not None else np.random.default_rng(0)
    e = rng.binomial(cfg.n_a, eps_a2, trials)
    fail = e > cfg.t_a
    return float(np.where(fail, e / cfg.n_a, 0.0).mean()), float(1 - fail.mean())


def decoded_auth_ber_exact(eps_a2: float, cfg: AuthConfig) -> tuple[float, float]:
    """Expectation of the same model by binomial summation."""
    if not 0 <= eps_a2 <= 1:
        raise InvalidInputError("eps_a2 must lie in [0, 1]")
    e = np.arange(cfg.t_a + 1, cfg.n_a + 1)
    pmf = stats.binom.pmf(e, cfg.n_a, eps_a2)
    return float((pmf * e / cfg.n_a).sum()), float(stats.binom.cdf(cfg.t_a, cfg.n_a, eps_a2))


def predicted_auth(model: PredictionModel, f: float, cfg: AuthConfig, rule: DemodulationRule | None = None):
    """``(eps_a2_hat, eps_a1_hat, P(eps_a1 = 0))`` at synthesized count ``f``."""
    rule = rule or DemodulationRule.from_spec()
    eps_a2 = raw_auth_ber(predict_profile(model, f), rule)
    return (eps_a2, *decoded_auth_ber_exact(eps_a2, cfg))
