"""Experiment plans: JSON recipes that drive batches of trials and write
byte-stable CSV outputs."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import profiles
from .auth import AuthConfig
from .channel import (
    CSV_FIELDS,
    AttackConfig,
    ChannelProfile,
    TrialConfig,
    _fmt,
    batch_trials,
    default_legal_profile,
    illegal,
    noiseless_profile,
    run_trial,
    summarize,
    trial_seeds,
)
from .errors import InvalidConfigError
from .layout import DEFAULT_SPEC, BarcodeSpec
from .predict import DemodulationRule, PredictionModel, decoded_auth_ber_exact, fit_prediction_model, predict_profile, raw_auth_ber

KINDS = ("trials", "table6", "fig17", "appendixA")


def spec_from_name(name: str) -> BarcodeSpec:
    if name == "default":
        return DEFAULT_SPEC
    if name == "binary":
        return BarcodeSpec.binary()
    raise InvalidConfigError(f"unknown spec {name!r} (use 'default' or 'binary')")


def resolve_channel(ref: str | None, spec: BarcodeSpec, legal_sigma2: float | None = None) -> ChannelProfile:
    """``legal`` / ``noiseless`` or a profile reference for an illegal channel."""
    if ref in (None, "legal"):
        return default_legal_profile(spec) if legal_sigma2 is None else default_legal_profile(spec, legal_sigma2)
    if ref == "noiseless":
        return noiseless_profile(spec)
    return illegal(profiles.resolve_profile(ref))


def resolve_model(ref: str) -> PredictionModel:
    """``table4`` fits the bundled series; anything else is a model JSON path."""
    if ref == "table4":
        return fit_prediction_model(profiles.table4_series(), "fit of the bundled SC series")
    path = Path(ref)
    if not path.exists():
        raise InvalidConfigError(f"prediction model {ref!r} not found")
    return PredictionModel.load(path)


@dataclass
class ExperimentPlan:
    name: str
    kind: str
    trials: int
    master_seed: int
    spec: str = "default"
    auth: dict = field(default_factory=dict)
    channel: str | None = None
    scenario: str = "legal"
    n_s: int = 1
    model: str = "table4"
    workers: int = 1
    out_dir: str = "results"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidConfigError(f"unknown plan kind {self.kind!r}; expected one of {KINDS}")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise InvalidConfigError("plan trial count must be a positive integer")
        spec_from_name(self.spec)
        self.auth_config()
        if self.channel not in (None, "legal", "noiseless"):
            profiles.resolve_profile(self.channel)

    def auth_config(self, **over) -> AuthConfig:
        kw = {**self.auth, **over}
        k_a = kw.pop("k_a", 147)
        try:
            return AuthConfig.preset(k_a, **kw)
        except (KeyError, TypeError) as exc:
            raise InvalidConfigError(f"invalid auth settings {kw!r}") from exc

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known - {"description", "reference"}
        if extra:
            raise InvalidConfigError(f"unknown plan fields {sorted(extra)}")
        try:
            return cls(**{k: v for k, v in d.items() if k in known})
        except TypeError as exc:
            raise InvalidConfigError(f"invalid plan: {exc}") from exc

    @classmethod
    def load(cls, ref) -> "ExperimentPlan":
        """A plan file path or the name of a bundled plan."""
        path = Path(ref)
        if not path.exists():
            path = profiles.plan_path(str(ref))
        if not path.exists():
            raise InvalidConfigError(f"plan {ref!r} not found")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InvalidConfigError(f"plan {ref!r} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


class _Runner:
    """Runs cells of trials with one shared seed list so cells are paired."""

    def __init__(self, plan: ExperimentPlan, workers: int):
        self.plan = plan
        self.workers = workers
        self.seeds = trial_seeds(plan.master_seed, plan.trials)
        self.trial_rows: list[list] = []

    def run(self, cell: str, config: TrialConfig) -> dict:
        if self.workers > 1:
            reports = batch_trials(config, self.plan.trials, self.plan.master_seed, self.workers).reports
        else:
            reports = [run_trial(config, s) for s in self.seeds]
        for i, r in enumerate(reports):
            self.trial_rows.append(
                [cell, i, r.trial_seed, r.eps_c2, r.eps_c1, r.eps_a2, r.eps_a1, r.verdict.value]
            )
        return summarize(reports)

    def trials_csv(self) -> str:
        return _rows_csv(("cell",) + CSV_FIELDS, self.trial_rows)


def _run_trials(plan: ExperimentPlan, run: _Runner):
    spec = spec_from_name(plan.spec)
    cfg = plan.auth_config()
    channel = resolve_channel(plan.channel, spec, plan.params.get("legal_sigma2"))
    attack = None
    if plan.scenario == "sc":
        attack = AttackConfig(n_s=plan.n_s, series=profiles.table4_series(), model=resolve_model(plan.model))
        channel = None
    s = run.run(plan.name, TrialConfig(plan.scenario, channel, attack, cfg, spec))
    header = ["cell", "scenario", "n_s", "k_a", "t_a", "strategy"] + list(s)
    return header, [[plan.name, plan.scenario, plan.n_s, cfg.k_a, cfg.t_a, cfg.strategy] + list(s.values())]


def _sc_config(plan, model, cfg, f) -> TrialConfig:
    attack = AttackConfig(n_s=int(f), model=model)
    return TrialConfig("sc", None, attack, cfg, spec_from_name(plan.spec))


def _run_table6(plan: ExperimentPlan, run: _Runner):
    model = resolve_model(plan.model)
    rule = DemodulationRule.from_spec(spec_from_name(plan.spec))
    delta = plan.params.get("delta", plan.auth.get("delta", 0.012))
    header = [
        "label", "k_a", "t_a", "n_s", "delta", "eps_a2_theory", "eps_a1_model", "p_zero_model",
        "eps_a2_sim", "eps_a1_sim", "p_zero_sim", "se_p_zero_sim", "p_illegal_sim",
        "eps_a2_ref", "eps_a1_ref", "p_zero_ref",
    ]
    rows = []
    for st in plan.params["settings"]:
        cfg = plan.auth_config(k_a=st["k_a"], delta=delta)
        f = st["n_s"]
        eps_a2 = raw_auth_ber(predict_profile(model, f), rule)
        mean, p0 = decoded_auth_ber_exact(eps_a2, cfg)
        s = run.run(f"{st['label']}:k_a={cfg.k_a}:n_s={f}", _sc_config(plan, model, cfg, f))
        ref = st.get("reference", {})
        rows.append([
            st["label"], cfg.k_a, cfg.t_a, f, float(delta), eps_a2, mean, p0,
            s["mean_eps_a2"], s["mean_eps_a1"], s["p_eps_a1_zero"], s["se_eps_a1_zero"], s["p_illegal"],
            ref.get("eps_a2", ""), ref.get("eps_a1", ""), ref.get("p_zero", ""),
        ])
    return header, rows


def _run_fig17(plan: ExperimentPlan, run: _Runner):
    model = resolve_model(plan.model)
    rule = DemodulationRule.from_spec(spec_from_name(plan.spec))
    lo, hi = plan.params.get("f_range", [1, 16])
    header = ["f", "k_a", "t_a", "eps_a2_theory", "eps_a2_sim", "eps_a1_sim", "eps_a1_model", "p_zero_sim"]
    rows = []
    for f in range(lo, hi + 1):
        eps_a2 = raw_auth_ber(predict_profile(model, f), rule)
        for k_a in plan.params.get("k_a", [147, 179]):
            cfg = plan.auth_config(k_a=k_a)
            s = run.run(f"f={f}:k_a={k_a}", _sc_config(plan, model, cfg, f))
            mean, _ = decoded_auth_ber_exact(eps_a2, cfg)
            rows.append([f, cfg.k_a, cfg.t_a, eps_a2, s["mean_eps_a2"], s["mean_eps_a1"], mean, s["p_eps_a1_zero"]])
    return header, rows


def _run_appendix(plan: ExperimentPlan, run: _Runner):
    spec = spec_from_name(plan.spec)
    channel = resolve_channel(plan.channel, spec, plan.params.get("legal_sigma2"))
    fill = float(plan.params.get("fill", 0.0))
    refs = plan.params.get("reference", {})
    header = ["occlusion", "strategy", "eps_c2", "eps_c1", "eps_a2", "eps_a1", "p_illegal", "se_eps_a1",
              "eps_c2_ref", "eps_c1_ref", "eps_a2_ref", "eps_a1_ref"]
    rows = []
    for a, b in plan.params.get("occlusions", [[0, 0], [2, 11], [4, 11], [7, 11]]):
        for strategy in plan.params.get("strategies", [1, 2]):
            cfg = plan.auth_config(strategy=strategy)
            tc = TrialConfig("legal", channel, None, cfg, spec, occlusion=(a, b, fill))
            s = run.run(f"{a}x{b}:s{strategy}", tc)
            ref = refs.get(f"{a}x{b}:{strategy}", [""] * 4)
            rows.append([f"{a}x{b}", strategy, s["mean_eps_c2"], s["mean_eps_c1"], s["mean_eps_a2"],
                         s["mean_eps_a1"], s["p_illegal"], s["se_eps_a1"], *ref])
    return header, rows


_KIND_RUNNERS = {"trials": _run_trials, "table6": _run_table6, "fig17": _run_fig17, "appendixA": _run_appendix}


@dataclass
class ExperimentOutput:
    summary_csv: str
    trials_csv: str
    paths: dict[str, Path] = field(default_factory=dict)


def run_plan(
    plan: ExperimentPlan, out_dir=None, workers: int | None = None, write: bool = True
) -> ExperimentOutput:
    """Run a plan and (optionally) write ``<name>_summary.csv`` and
    ``<name>_trials.csv``. Output bytes do not depend on ``workers``."""
    runner = _Runner(plan, plan.workers if workers is None else workers)
    try:
        header, rows = _KIND_RUNNERS[plan.kind](plan, runner)
    except KeyError as exc:
        raise InvalidConfigError(f"plan {plan.name!r} is missing parameter {exc}") from exc
    summary = _rows_csv(header, rows) + f"# plan,{plan.name}\n# master_seed,{plan.master_seed}\n# trials,{plan.trials}\n"
    out = ExperimentOutput(summary, runner.trials_csv())
    if write:
        d = Path(out_dir if out_dir is not None else plan.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        out.paths = {"summary": d / f"{plan.name}_summary.csv", "trials": d / f"{plan.name}_trials.csv"}
        out.paths["summary"].write_text(out.summary_csv)
        out.paths["trials"].write_text(out.trials_csv)
    return out


def read_summary(text: str) -> list[dict]:
    """Parse a summary CSV body (footer lines skipped)."""
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(body))

