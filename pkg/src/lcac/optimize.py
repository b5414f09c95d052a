"""Threshold calibration, covertness check, BCH preset selection and the
attack break-even synthesized-sample count."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .auth import AuthConfig, admissible_range, locations_from_digest
from .bch import PRESETS
from .channel import ChannelProfile, apply_channel
from .errors import InsufficientDataError, InvalidConfigError
from .layout import DEFAULT_SPEC, BarcodeSpec, assemble_grid, demodulate, disassemble_grid, modulate, rs_decode, rs_encode
from .predict import DemodulationRule, PredictionModel, decoded_auth_ber_exact, predict_profile, raw_auth_ber

MEAN, PROBABILITY = "mean", "probability"


def calibrate_delta(legal_reports) -> float:
    """Largest instantaneous decoded authentication BER over legal trials."""
    reports = list(legal_reports)
    if not reports:
        raise InsufficientDataError("need at least one legal trial to calibrate delta")
    return max(float(getattr(r, "eps_a1", r)) for r in reports)


@dataclass(frozen=True)
class CovertnessReport:
    passed: bool
    n_a: int
    trials: int
    placement: str
    failures: int
    mean_eps_c1: float
    max_eps_c1: float


def _positions(n_a, spec, strategy, placement, rng):
    pool = admissible_range(strategy, spec)
    if n_a > len(pool):
        raise InvalidConfigError(f"n_a={n_a} exceeds the admissible range of {len(pool)} bits")
    if placement == "adversarial":
        return np.sort(pool)[:n_a]  # packed into as few RS symbols as possible
    key = rng.bytes(16)
    cfg = AuthConfig(strategy=strategy)
    return locations_from_digest(rng.bytes(32), key, cfg, spec, n_positions=n_a).positions


def check_covertness(
    n_a: int,
    spec: BarcodeSpec = DEFAULT_SPEC,
    legal: ChannelProfile | None = None,
    trials: int = 20,
    seed: int = 0,
    strategy: int = 1,
    placement: str = "random",
) -> CovertnessReport:
    """Embed ``n_a`` payload bits and check the source still decodes exactly
    through the legal channel in every trial.

    ``adversarial`` placement packs the positions into consecutive bytes and
    uses the complement of the host bits, so every embedded bit is an error.
    """
    from .channel import default_legal_profile

    if placement not in ("random", "adversarial"):
        raise InvalidConfigError(f"unknown placement {placement!r}")
    legal = legal or default_legal_profile(spec)
    rng = np.random.default_rng(seed)
    eps = []
    for _ in range(trials):
        src = rng.integers(0, 2, spec.source_bits, dtype=np.uint8)
        host = rs_encode(src, spec)
        pos = _positions(n_a, spec, strategy, placement, rng)
        payload = 1 - host[pos] if placement == "adversarial" else rng.integers(0, 2, n_a, dtype=np.uint8)
        stream = host.copy()
        stream[pos] = payload
        grid = apply_channel(assemble_grid(modulate(stream, spec), spec), legal, rng, spec)
        data, _ = disassemble_grid(grid, spec)
        decoded, _ = rs_decode(demodulate(data, spec).bits, spec)
        eps.append(float(np.count_nonzero(decoded != src)) / len(src))
    eps = np.array(eps)
    fails = int(np.count_nonzero(eps))
    return CovertnessReport(fails == 0, n_a, trials, placement, fails, float(eps.mean()), float(eps.max()))


def _success_probability(eps_a2: float, cfg: AuthConfig, delta: float) -> float:
    """P(eps_a1 <= delta) under the i.i.d. decoded model."""
    e_max = max(cfg.t_a, math.floor(delta * cfg.n_a + 1e-12))
    return float(stats.binom.cdf(e_max, cfg.n_a, eps_a2))


def attack_succeeds(
    model: PredictionModel, f: float, cfg: AuthConfig, delta: float,
    framing: str = MEAN, p_success: float = 0.5, rule: DemodulationRule | None = None,
) -> bool:
    """Mean framing: predicted eps_a1 <= delta. Probability framing:
    P(eps_a1 <= delta) >= p_success."""
    rule = rule or DemodulationRule.from_spec()
    eps_a2 = raw_auth_ber(predict_profile(model, f), rule)
    if framing == MEAN:
        return decoded_auth_ber_exact(eps_a2, cfg)[0] <= delta
    if framing == PROBABILITY:
        return _success_probability(eps_a2, cfg, delta) >= p_success
    raise InvalidConfigError(f"unknown framing {framing!r}")


def break_even(
    model: PredictionModel, delta: float, cfg: AuthConfig,
    framing: str = MEAN, p_success: float = 0.5, rule: DemodulationRule | None = None,
) -> float:
    """Smallest integer ``f`` in the model range at which the attack
    succeeds; ``math.inf`` when it never does."""
    lo, hi = model.extrapolation_range
    for f in range(math.ceil(lo), math.floor(hi) + 1):
        if attack_succeeds(model, f, cfg, delta, framing, p_success, rule):
            return f
    return math.inf


def _presets(presets):
    if presets is None:
        return [AuthConfig(n_a=n, k_a=k, t_a=t) for (n, k), t in sorted(PRESETS.items())]
    out = [p if isinstance(p, AuthConfig) else AuthConfig(*p) for p in presets]
    if not out:
        raise InvalidConfigError("preset list is empty")
    return out


def choose_code(
    model: PredictionModel, delta: float, target_n_s: float, presets=None,
    framing: str = MEAN, p_success: float = 0.5, rule: DemodulationRule | None = None,
) -> tuple[int, int]:
    """Largest-``t_a`` preset that still detects an attack at ``target_n_s``;
    falls back to the smallest ``t_a`` with a warning."""
    cands = sorted(_presets(presets), key=lambda c: c.t_a, reverse=True)
    for cfg in cands:
        if not attack_succeeds(model, target_n_s, cfg, delta, framing, p_success, rule):
            return cfg.k_a, cfg.t_a
    weakest = cands[-1]
    warnings.warn(
        f"no preset detects an attack at n_s={target_n_s}; using the smallest t_a={weakest.t_a}",
        RuntimeWarning,
        stacklevel=2,
    )
    return weakest.k_a, weakest.t_a


@dataclass(frozen=True)
class PresetEvaluation:
    k_a: int
    t_a: int
    f: float
    eps_a2: float
    eps_a1: float
    p_eps_a1_zero: float
    break_even: float


def evaluate_preset(model, cfg: AuthConfig, f: float, delta: float, framing=MEAN, p_success=0.5, rule=None):
    rule = rule or DemodulationRule.from_spec()
    eps_a2 = raw_auth_ber(predict_profile(model, f), rule)
    mean, p0 = decoded_auth_ber_exact(eps_a2, cfg)
    be = break_even(model, delta, cfg, framing, p_success, rule)
    return PresetEvaluation(cfg.k_a, cfg.t_a, f, eps_a2, mean, p0, be)


@dataclass
class OptimizationResult:
    k_a: int
    t_a: int
    n_a: int
    delta: float
    target_n_s: float
    framing: str
    break_even_n_s: float
    covertness: CovertnessReport | None = None
    baseline: PresetEvaluation | None = None
    chosen: PresetEvaluation | None = None
    chosen_at_break_even: PresetEvaluation | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        def enc(v):
            return None if v is None else {k: (None if isinstance(x, float) and math.isinf(x) else x) for k, x in asdict(v).items()}

        return {
            "k_a": self.k_a, "t_a": self.t_a, "n_a": self.n_a, "delta": self.delta,
            "target_n_s": self.target_n_s, "framing": self.framing,
            "break_even_n_s": None if math.isinf(self.break_even_n_s) else self.break_even_n_s,
            "covertness": enc(self.covertness), "baseline": enc(self.baseline),
            "chosen": enc(self.chosen), "chosen_at_break_even": enc(self.chosen_at_break_even),
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def report(self) -> str:
        """Before/after table: eps_a2, eps_a1 and P(eps_a1 = 0) per setting."""
        lines = [f"{'setting':<34}{'eps_a2':>9}{'eps_a1':>9}{'P(eps_a1=0)':>13}{'f*':>6}"]
        for label, ev in (("before", self.baseline), ("after", self.chosen), ("after @ f*", self.chosen_at_break_even)):
            if ev is None:
                continue
            be = "inf" if math.isinf(ev.break_even) else f"{ev.break_even:g}"
            setting = f"{label}: k_a={ev.k_a} t_a={ev.t_a} n_s={ev.f:g}"
            lines.append(f"{setting:<34}{ev.eps_a2:>9.4f}{ev.eps_a1:>9.4f}{ev.p_eps_a1_zero:>12.2%}{be:>6}")
        lines.append(f"delta={self.delta:g}  framing={self.framing}")
        return "\n".join(lines) + "\n"


def optimize(
    model: PredictionModel,
    delta: float,
    target_n_s: float,
    baseline: AuthConfig | None = None,
    presets=None,
    framing: str = MEAN,
    p_success: float = 0.5,
    spec: BarcodeSpec = DEFAULT_SPEC,
    covertness_trials: int = 0,
    seed: int = 0,
) -> OptimizationResult:
    """Covertness of ``n_a`` first, then the preset choice at ``target_n_s``."""
    baseline = baseline or AuthConfig()
    rule = DemodulationRule.from_spec(spec)
    cov = None
    if covertness_trials:
        cov = check_covertness(baseline.n_a, spec, trials=covertness_trials, seed=seed, strategy=baseline.strategy)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        k_a, t_a = choose_code(model, delta, target_n_s, presets, framing, p_success, rule)
    cfg = AuthConfig(n_a=baseline.n_a, k_a=k_a, t_a=t_a, strategy=baseline.strategy, delta=delta)
    chosen = evaluate_preset(model, cfg, target_n_s, delta, framing, p_success, rule)
    at_be = None
    if not math.isinf(chosen.break_even):
        at_be = evaluate_preset(model, cfg, chosen.break_even, delta, framing, p_success, rule)
    return OptimizationResult(
        k_a, t_a, cfg.n_a, delta, target_n_s, framing, chosen.break_even, cov,
        evaluate_preset(model, baseline, target_n_s, delta, framing, p_success, rule),
        chosen, at_be, [str(w.message) for w in caught],
    )
