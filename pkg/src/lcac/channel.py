"""Legal (single print-and-capture) and illegal (double print-and-scan)
channel simulation, direct and synthesized copy attacks, occlusion, and
end-to-end trials that report the four bit error rates."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .auth import (
    AuthConfig,
    SecretBundle,
    Verdict,
    authenticate,
    bch_decode,
    bch_encode,
    embed,
    extract,
    locations_from_digest,
)
from .errors import InvalidConfigError, InvalidInputError, InvalidProfileError, MissingProfileError
from .ggd import ConstellationProfile, GgdParams, centered_noise
from .layout import (
    DEFAULT_SPEC,
    BarcodeSpec,
    ModuleGrid,
    assemble_grid,
    demodulate,
    disassemble_grid,
    modulate,
    rs_decode,
    rs_encode,
    symbol_cells,
)

LEGAL, ILLEGAL = "legal", "illegal"
DEFAULT_LEGAL_SIGMA2 = 20.0


@dataclass(frozen=True)
class ChannelProfile:
    kind: str
    profile: ConstellationProfile
    clamp: tuple[float, float] = (0.0, 255.0)

    def __post_init__(self):
        if self.kind not in (LEGAL, ILLEGAL):
            raise InvalidConfigError(f"channel kind must be {LEGAL!r} or {ILLEGAL!r}")


def default_legal_profile(spec: BarcodeSpec = DEFAULT_SPEC, sigma2: float = DEFAULT_LEGAL_SIGMA2, gamma: float = 2.0):
    """Synthetic single print-and-capture channel: unbiased means, Gaussian
    shape, small variance. Not a measured profile."""
    prof = ConstellationProfile(
        tuple(spec.constellation),
        tuple(GgdParams(x, sigma2, gamma) for x in spec.constellation),
        f"synthetic legal SPS sigma2={sigma2:g} gamma={gamma:g}",
    )
    return ChannelProfile(LEGAL, prof)


def noiseless_profile(spec: BarcodeSpec = DEFAULT_SPEC, kind: str = LEGAL) -> ChannelProfile:
    prof = ConstellationProfile(
        tuple(spec.constellation),
        tuple(GgdParams(x, 1e-6, 2.0) for x in spec.constellation),
        "degenerate noiseless",
    )
    return ChannelProfile(kind, prof)


def illegal(profile: ConstellationProfile) -> ChannelProfile:
    return ChannelProfile(ILLEGAL, profile)


def check_ordering(legal: ChannelProfile, illegal_ch: ChannelProfile) -> bool:
    """True when every legal variance is strictly below the illegal one."""
    _, s_legal, _ = legal.profile.arrays()
    _, s_illegal, _ = illegal_ch.profile.arrays()
    return bool(np.all(s_legal < s_illegal))


def apply_channel(grid: ModuleGrid, ch: ChannelProfile, rng: np.random.Generator, spec: BarcodeSpec = DEFAULT_SPEC):
    """Replace every module by an independent GGD draw.

    A module is attributed to the constellation point of its decision cell;
    it keeps its offset from that point, and gets the point's mean shift and
    noise. Data modules therefore draw exactly from the profile row.
    """
    if not ch.profile.covers(spec.constellation):
        raise InvalidProfileError(
            f"profile {ch.profile.provenance!r} does not cover constellation {spec.constellation}"
        )
    values = grid.intensities.reshape(-1)
    cells = symbol_cells(values, spec) - 1
    x = np.asarray(spec.constellation, dtype=float)
    mu, s2, g = ch.profile.arrays()
    out = values + (mu - x)[cells] + centered_noise(s2[cells], g[cells], rng)
    lo, hi = ch.clamp
    return grid.with_intensities(np.clip(out, lo, hi).reshape(grid.side, grid.side))


def occlude(grid: ModuleGrid, a: int, b: int, fill: float = 0.0, origin: tuple[int, int] = (0, 0)) -> ModuleGrid:
    """Cover an ``a x b`` module rectangle (rows x cols) with ``fill``."""
    r0, c0 = origin
    if a < 0 or b < 0 or r0 < 0 or c0 < 0 or r0 + a > grid.side or c0 + b > grid.side:
        raise InvalidInputError(f"occlusion {a}x{b} at {origin} does not fit a {grid.side}-module grid")
    if not 0 <= fill <= 255:
        raise InvalidInputError("fill gray must lie in [0, 255]")
    values = np.array(grid.intensities)
    values[r0 : r0 + a, c0 : c0 + b] = fill
    return grid.with_intensities(values)


@dataclass(frozen=True)
class AttackConfig:
    """Synthesized-copy attack.

    ``empirical``: one channel pass with the profile indexed by ``n_s``,
    taken from ``series`` or extrapolated by ``model``.
    ``compositional``: ``n_s`` first-stage captures are averaged, re-quantized
    to integer gray, reprinted with centered second-stage noise and finally
    captured by the legal receiver.
    """

    n_s: int = 1
    mode: str = "empirical"
    series: dict[int, ConstellationProfile] | None = None
    model: Any = None
    first_stage: ChannelProfile | None = None
    second_stage: tuple[tuple[float, float], ...] | None = None  # (sigma2, gamma) per point

    def __post_init__(self):
        if self.n_s < 1:
            raise InvalidConfigError("n_s must be at least 1")
        if self.mode not in ("empirical", "compositional"):
            raise InvalidConfigError(f"unknown attack mode {self.mode!r}")
        if self.mode == "compositional" and (self.first_stage is None or self.second_stage is None):
            raise InvalidConfigError("compositional mode needs first-stage and second-stage noise")

    def profile(self) -> ConstellationProfile:
        if self.series is not None and self.n_s in self.series:
            return self.series[self.n_s]
        if self.model is not None:
            from .predict import predict_profile

            return predict_profile(self.model, self.n_s)
        raise MissingProfileError(f"no profile for n_s={self.n_s}")


def second_stage_from(illegal_prof: ConstellationProfile, legal: ChannelProfile) -> tuple[tuple[float, float], ...]:
    """Reprint noise as the per-point variance gap between the illegal and
    legal profiles, with the illegal shape."""
    _, s_ill, g_ill = illegal_prof.arrays()
    _, s_leg, _ = legal.profile.arrays()
    gap = s_ill - s_leg
    if np.any(gap <= 0):
        raise InvalidProfileError("illegal variance must exceed legal variance at every point")
    return tuple((float(v), float(g)) for v, g in zip(gap, g_ill))


@dataclass(frozen=True)
class BerReport:
    eps_c2: float
    eps_c1: float
    eps_a2: float
    eps_a1: float
    verdict: Verdict
    trial_seed: int = 0
    rs_failures: int = 0
    bch_failed: bool = False


@dataclass(frozen=True)
class Transmission:
    grid: ModuleGrid
    s_c1: np.ndarray
    s_c2: np.ndarray
    s_a2: np.ndarray


def send(source, bundle: SecretBundle, cfg: AuthConfig, spec: BarcodeSpec = DEFAULT_SPEC, layout_seed: int = 0):
    s_c2 = rs_encode(source, spec)
    s_a2 = bch_encode(bundle.s_a1, cfg)
    loc = locations_from_digest(bundle.source_digest, bundle.key, cfg, spec)
    s_e2 = embed(s_c2, s_a2, loc)
    grid = assemble_grid(modulate(s_e2, spec), spec, layout_seed)
    return Transmission(grid, np.asarray(source, dtype=np.uint8), s_c2, s_a2)


@dataclass(frozen=True)
class Reception:
    s_c2_hat: np.ndarray
    s_c1_hat: np.ndarray
    block_failures: np.ndarray
    s_a2_hat: np.ndarray
    s_a1_hat: np.ndarray
    bch_failed: bool
    eps_a1: float
    verdict: Verdict


def receive(grid: ModuleGrid, bundle: SecretBundle, cfg: AuthConfig, spec: BarcodeSpec = DEFAULT_SPEC) -> Reception:
    data, _ = disassemble_grid(grid, spec)
    s_c2_hat = demodulate(np.clip(data, 0, 255), spec).bits
    s_c1_hat, flags = rs_decode(s_c2_hat, spec)
    loc = locations_from_digest(bundle.source_digest, bundle.key, cfg, spec)
    s_a2_hat = extract(s_c2_hat, loc)
    s_a1_hat, failed = bch_decode(s_a2_hat, cfg)
    eps_a1, verdict = authenticate(s_a1_hat, bundle.s_a1, cfg.delta)
    return Reception(s_c2_hat, s_c1_hat, flags, s_a2_hat, s_a1_hat, failed, eps_a1, verdict)


def _ber(a, b) -> float:
    return float(np.count_nonzero(a != b)) / len(a)


def report(tx: Transmission, rx: Reception, trial_seed: int = 0) -> BerReport:
    """``eps_c2`` compares against the coded stream before embedding, so it
    includes the bits overwritten by the authentication message."""
    return BerReport(
        eps_c2=_ber(rx.s_c2_hat, tx.s_c2),
        eps_c1=_ber(rx.s_c1_hat, tx.s_c1),
        eps_a2=_ber(rx.s_a2_hat, tx.s_a2),
        eps_a1=rx.eps_a1,
        verdict=rx.verdict,
        trial_seed=trial_seed,
        rs_failures=int(rx.block_failures.sum()),
        bch_failed=bool(rx.bch_failed),
    )


def _finish(tx, captured, bundle, cfg, spec, occlusion, trial_seed):
    if occlusion is not None:
        a, b = occlusion[:2]
        fill = occlusion[2] if len(occlusion) > 2 else 0.0
        captured = occlude(captured, a, b, fill)
    return report(tx, receive(captured, bundle, cfg, spec), trial_seed)


def run_legal_trial(
    source, bundle, cfg, spec, legal: ChannelProfile, rng, layout_seed=0, occlusion=None, trial_seed=0
) -> BerReport:
    tx = send(source, bundle, cfg, spec, layout_seed)
    captured = apply_channel(tx.grid, legal, rng, spec)
    return _finish(tx, captured, bundle, cfg, spec, occlusion, trial_seed)


def run_dc_attack(
    source, bundle, cfg, spec, illegal_ch: ChannelProfile, rng, layout_seed=0, occlusion=None, trial_seed=0
) -> BerReport:
    if illegal_ch.kind != ILLEGAL:
        raise InvalidConfigError("a copy attack needs an illegal (DPS) channel profile")
    return run_legal_trial(source, bundle, cfg, spec, illegal_ch, rng, layout_seed, occlusion, trial_seed)


def synthesize_copy(grid: ModuleGrid, attack: AttackConfig, capture: ChannelProfile, rng, spec=DEFAULT_SPEC):
    """The grid a legal receiver sees after a synthesized copy attack."""
    if attack.mode == "empirical":
        return apply_channel(grid, illegal(attack.profile()), rng, spec)
    captures = [apply_channel(grid, attack.first_stage, rng, spec).intensities for _ in range(attack.n_s)]
    synthesized = np.clip(np.rint(np.mean(captures, axis=0)), 0, 255)
    cells = symbol_cells(synthesized.reshape(-1), spec) - 1
    s2 = np.array([v for v, _ in attack.second_stage])
    g = np.array([gm for _, gm in attack.second_stage])
    reprinted = synthesized.reshape(-1) + centered_noise(s2[cells], g[cells], rng)
    reprinted = np.clip(np.rint(reprinted), 0, 255).reshape(grid.side, grid.side)
    return apply_channel(grid.with_intensities(reprinted), capture, rng, spec)


def run_sc_attack(
    source, bundle, cfg, spec, attack: AttackConfig, capture: ChannelProfile | None, rng,
    layout_seed=0, occlusion=None, trial_seed=0,
) -> BerReport:
    if attack.mode == "compositional" and capture is None:
        raise InvalidConfigError("compositional attacks need the legal capture profile")
    tx = send(source, bundle, cfg, spec, layout_seed)
    captured = synthesize_copy(tx.grid, attack, capture, rng, spec)
    return _finish(tx, captured, bundle, cfg, spec, occlusion, trial_seed)


@dataclass(frozen=True)
class TrialConfig:
    """Everything one Monte Carlo trial needs besides its seed."""

    scenario: str = "legal"  # legal | dc | sc
    channel: ChannelProfile | None = None
    attack: AttackConfig | None = None
    auth: AuthConfig = field(default_factory=AuthConfig)
    spec: BarcodeSpec = DEFAULT_SPEC
    layout_seed: int = 0
    occlusion: tuple | None = None
    label: str = ""

    def __post_init__(self):
        if self.scenario not in ("legal", "dc", "sc"):
            raise InvalidConfigError(f"unknown scenario {self.scenario!r}")
        if self.scenario == "sc" and self.attack is None:
            raise InvalidConfigError("sc scenario needs an attack config")


def run_trial(config: TrialConfig, trial_seed: int) -> BerReport:
    """Draw a fresh source, key and authentication message, then simulate."""
    rng = np.random.default_rng(trial_seed)
    spec, cfg = config.spec, config.auth
    source = rng.integers(0, 2, spec.source_bits, dtype=np.uint8)
    s_a1 = rng.integers(0, 2, cfg.k_a, dtype=np.uint8)
    bundle = SecretBundle.create(source, s_a1, key=rng.bytes(16))
    kw = dict(layout_seed=config.layout_seed, occlusion=config.occlusion, trial_seed=trial_seed)
    if config.scenario == "legal":
        channel = config.channel or default_legal_profile(spec)
        return run_legal_trial(source, bundle, cfg, spec, channel, rng, **kw)
    if config.scenario == "dc":
        return run_dc_attack(source, bundle, cfg, spec, config.channel, rng, **kw)
    return run_sc_attack(source, bundle, cfg, spec, config.attack, config.channel, rng, **kw)


def trial_seeds(master_seed: int, count: int) -> list[int]:
    children = np.random.SeedSequence(master_seed).spawn(count)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def _run_chunk(args):
    config, seeds = args
    return [run_trial(config, s) for s in seeds]


def _binom_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n)


def summarize(reports: list[BerReport]) -> dict:
    n = len(reports)
    out: dict[str, float] = {"trials": n}
    for name in ("eps_c2", "eps_c1", "eps_a2", "eps_a1"):
        vals = np.array([getattr(r, name) for r in reports])
        out[f"mean_{name}"] = float(vals.mean())
        out[f"se_{name}"] = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    for name, hits in (
        ("p_eps_a1_zero", sum(r.eps_a1 == 0 for r in reports)),
        ("p_eps_c1_zero", sum(r.eps_c1 == 0 for r in reports)),
        ("p_illegal", sum(r.verdict == Verdict.ILLEGAL for r in reports)),
    ):
        p = hits / n
        out[name] = p
        out[f"se_{name[2:]}"] = _binom_se(p, n)
    return out


@dataclass
class BatchResult:
    config: TrialConfig
    master_seed: int
    reports: list[BerReport]
    summary: dict


def batch_trials(config: TrialConfig, trial_count: int, master_seed: int, workers: int = 1) -> BatchResult:
    """Run trials with per-trial seeds spawned from ``master_seed``.

    Results are identical for any ``workers`` value: seeds are fixed up
    front and reports are kept in trial order.
    """
    if trial_count < 1:
        raise InvalidInputError("trial_count must be at least 1")
    seeds = trial_seeds(master_seed, trial_count)
    if workers <= 1:
        reports = [run_trial(config, s) for s in seeds]
    else:
        size = math.ceil(len(seeds) / (workers * 4))
        chunks = [(config, seeds[i : i + size]) for i in range(0, len(seeds), size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = [r for chunk in pool.map(_run_chunk, chunks) for r in chunk]
    return BatchResult(config, master_seed, reports, summarize(reports))


CSV_FIELDS = ("trial", "seed", "eps_c2", "eps_c1", "eps_a2", "eps_a1", "verdict")


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def batch_csv(result: BatchResult) -> str:
    """Per-trial rows followed by ``#``-prefixed summary footer lines."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for i, r in enumerate(result.reports):
        w.writerow([i, r.trial_seed, _fmt(r.eps_c2), _fmt(r.eps_c1), _fmt(r.eps_a2), _fmt(r.eps_a1), r.verdict.value])
    for key, val in result.summary.items():
        buf.write(f"# {key},{_fmt(val)}\n")
    return buf.getvalue()
