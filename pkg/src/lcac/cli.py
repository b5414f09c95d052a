"""``lcac`` command-line interface.

Exit status: 0 success, 1 verdict Illegal (``verify`` only), 2 usage or
validation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import profiles
from .auth import AuthConfig, SecretBundle, read_key
from .channel import AttackConfig, batch_csv, batch_trials, TrialConfig, apply_channel, synthesize_copy, receive, send
from .errors import InsufficientDataError, InvalidInputError, LcacError
from .experiments import ExperimentPlan, resolve_channel, resolve_model, run_plan, spec_from_name
from .ggd import ConstellationProfile, SampleSet, estimate_profile
from .layout import load_grid, save_grid
from .optimize import MEAN, PROBABILITY, optimize
from .predict import DemodulationRule, PredictionModel, decoded_auth_ber_exact, fit_prediction_model, predict_profile, raw_auth_ber

DEFAULT_SEED = 2024


class UsageError(LcacError):
    pass


def _sidecars(image: Path) -> tuple[Path, Path]:
    return image.with_suffix(image.suffix + ".json"), image.with_suffix(image.suffix + ".auth.json")


def _read_bits(path: Path, nbits: int) -> np.ndarray:
    """A file of '0'/'1' characters or raw bytes (MSB first)."""
    raw = path.read_bytes()
    text = raw.decode("ascii", errors="replace")
    digits = "".join(text.split())
    if digits and set(digits) <= {"0", "1"} and len(digits) == nbits:
        return np.frombuffer(digits.encode(), dtype=np.uint8) - ord("0")
    if len(raw) * 8 == nbits:
        return np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
    raise InvalidInputError(f"{path} holds neither {nbits} bit characters nor {nbits // 8} bytes")


def _auth_cfg(args, meta: dict | None = None) -> AuthConfig:
    base = dict((meta or {}).get("auth", {}))
    if getattr(args, "k_a", None) is not None:
        base["k_a"] = args.k_a
    if getattr(args, "strategy", None) is not None:
        base["strategy"] = args.strategy
    if getattr(args, "delta", None) is not None:
        base["delta"] = args.delta
    k_a = base.pop("k_a", 147)
    base.pop("n_a", None)
    base.pop("t_a", None)
    return AuthConfig.preset(k_a, **base)


def _auth_dict(cfg: AuthConfig) -> dict:
    return {"k_a": cfg.k_a, "strategy": cfg.strategy, "delta": cfg.delta, "granularity": cfg.granularity}


def cmd_generate(args) -> int:
    spec = spec_from_name(args.spec)
    cfg = _auth_cfg(args)
    key_path = Path(args.key)
    key_seq, msg_seq = np.random.SeedSequence(args.seed).spawn(2)
    rng = np.random.default_rng(msg_seq)
    if args.new_key:
        key = np.random.default_rng(key_seq).bytes(16)
    else:
        if not key_path.exists():
            raise UsageError(f"key file {key_path} not found")
        key = read_key(key_path)
    source = _read_bits(Path(args.source), spec.source_bits)
    s_a1 = _read_bits(Path(args.auth), cfg.k_a) if args.auth else rng.integers(0, 2, cfg.k_a, dtype=np.uint8)
    bundle = SecretBundle.create(source, s_a1, key)
    tx = send(source, bundle, cfg, spec, args.layout_seed)
    out = Path(args.out or "barcode.pgm")
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.new_key:
        key_path.write_text(key.hex() + "\n")
    save_grid(tx.grid, out, spec)
    bundle.save(key_path, _sidecars(out)[1], write_key=False, extra={"auth": _auth_dict(cfg)})
    print(f"wrote {out} ({spec.side}x{spec.side} modules)")
    return 0


def _load_image(path: str):
    image = Path(path)
    if not image.exists() or not _sidecars(image)[0].exists():
        raise UsageError(f"{image} or its metadata sidecar is missing")
    return image, *load_grid(image)


def _load_bundle(image: Path, key: str, auth_meta: str | None):
    meta_path = Path(auth_meta) if auth_meta else _sidecars(image)[1]
    if not Path(key).exists():
        raise UsageError(f"key file {key} not found")
    if not meta_path.exists():
        raise UsageError(f"authentication metadata {meta_path} not found")
    return SecretBundle.load(key, meta_path), json.loads(meta_path.read_text())


def cmd_decode(args) -> int:
    image, grid, spec = _load_image(args.image)
    from .layout import demodulate, disassemble_grid, rs_decode

    data, _ = disassemble_grid(grid, spec)
    bits, flags = rs_decode(demodulate(np.clip(data, 0, 255), spec).bits, spec)
    if args.out:
        Path(args.out).write_bytes(np.packbits(bits).tobytes())
    print(f"source bits: {len(bits)}  failed RS blocks: {int(flags.sum())}/{len(flags)}")
    if not args.out:
        print("".join(map(str, bits.tolist())))
    return 0


def cmd_verify(args) -> int:
    image, grid, spec = _load_image(args.image)
    bundle, meta = _load_bundle(image, args.key, args.auth_meta)
    cfg = _auth_cfg(args, meta)
    rx = receive(grid, bundle, cfg, spec)
    print(f"eps_a1={rx.eps_a1:.6f} delta={cfg.delta:g} bch_failed={rx.bch_failed} verdict={rx.verdict.value}")
    return 1 if rx.verdict.value == "Illegal" else 0


def _trial_out(args, provenance: str, n_s: int | None) -> Path:
    if args.out:
        return Path(args.out)
    tag = "".join(c if c.isalnum() else "_" for c in provenance).strip("_")
    return Path(f"{tag}_ns{n_s}.csv" if n_s else f"{tag}.csv")


def _write_batch(args, config: TrialConfig, provenance: str, n_s: int | None) -> int:
    result = batch_trials(config, args.trials, args.seed, args.workers)
    out = _trial_out(args, provenance, n_s)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(batch_csv(result))
    s = result.summary
    print(f"wrote {out}: mean eps_a1={s['mean_eps_a1']:.4f} P(eps_a1=0)={s['p_eps_a1_zero']:.4f} "
          f"P(Illegal)={s['p_illegal']:.4f}")
    return 0


def cmd_channel(args) -> int:
    spec = spec_from_name(args.spec)
    if args.image:
        image, grid, spec = _load_image(args.image)
    ch = resolve_channel(args.profile, spec)
    if args.image:
        if not args.out:
            raise UsageError("--out is required when transforming an image")
        out = apply_channel(grid, ch, np.random.default_rng(args.seed), spec)
        save_grid(out, args.out, spec)
        _copy_auth(image, Path(args.out))
        print(f"wrote {args.out}")
        return 0
    scenario = "legal" if ch.kind == "legal" else "dc"
    return _write_batch(args, TrialConfig(scenario, ch, None, _auth_cfg(args), spec), ch.profile.provenance, None)


def _copy_auth(src: Path, dst: Path) -> None:
    a = _sidecars(src)[1]
    if a.exists():
        _sidecars(dst)[1].write_text(a.read_text())


def _attack_config(args) -> AttackConfig:
    if args.ns is None:
        raise UsageError("attack needs --ns (use --profile for a direct copy through a profile)")
    model = resolve_model(args.model) if args.model else None
    return AttackConfig(n_s=args.ns, series=profiles.table4_series(), model=model)


def cmd_attack(args) -> int:
    spec = spec_from_name(args.spec)
    if args.image:
        image, grid, spec = _load_image(args.image)
    if args.ns is None:
        ch = resolve_channel(args.profile or "table2:a", spec)
        if ch.kind != "illegal":
            raise UsageError("a direct copy needs an illegal profile reference")
        attack, provenance, ns = None, ch.profile.provenance, None
    else:
        attack = _attack_config(args)
        ch = None
        provenance, ns = "sc_attack", args.ns
        attack.profile()  # fail early on a missing profile
    if args.image:
        if not args.out:
            raise UsageError("--out is required when transforming an image")
        rng = np.random.default_rng(args.seed)
        out = apply_channel(grid, ch, rng, spec) if attack is None else synthesize_copy(grid, attack, None, rng, spec)
        save_grid(out, args.out, spec)
        _copy_auth(image, Path(args.out))
        print(f"wrote {args.out}")
        return 0
    scenario = "dc" if attack is None else "sc"
    return _write_batch(args, TrialConfig(scenario, ch, attack, _auth_cfg(args), spec), provenance, ns)


def cmd_estimate(args) -> int:
    spec = spec_from_name(args.spec)
    obs: dict[float, list[float]] = defaultdict(list)
    try:
        with open(args.samples, newline="") as fh:
            reader = csv.DictReader(fh)
            if not reader.fieldnames or not {"constellation", "value"} <= set(reader.fieldnames):
                raise InvalidInputError("samples CSV needs 'constellation' and 'value' columns")
            for row in reader:
                obs[float(row["constellation"])].append(float(row["value"]))
    except (ValueError, TypeError) as exc:
        if isinstance(exc, LcacError):
            raise
        raise InvalidInputError(f"malformed samples CSV: {exc}") from exc
    unknown = set(obs) - set(spec.constellation)
    if unknown:
        raise InvalidInputError(f"constellation values {sorted(unknown)} are not in the spec")
    if len(obs) < spec.modulation_order:
        raise InsufficientDataError(f"samples cover {len(obs)} of {spec.modulation_order} constellation points")
    samples = SampleSet({x: np.array(v) for x, v in obs.items()})
    prof = estimate_profile(samples, spec.constellation, f"estimated from {Path(args.samples).name}")
    text = json.dumps(prof.to_dict(), indent=1) + "\n"
    _emit(text, args.out)
    return 0


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
        print(f"wrote {out}")
    else:
        sys.stdout.write(text)


def cmd_fit(args) -> int:
    if args.profiles:
        series = {}
        for p in args.profiles:
            d = json.loads(Path(p).read_text())
            if "n_s" not in d:
                raise InvalidInputError(f"{p} has no 'n_s' field")
            series[int(d["n_s"])] = ConstellationProfile.from_dict(d)
        model = fit_prediction_model(series, "fit of " + ", ".join(Path(p).name for p in args.profiles))
    else:
        model = resolve_model("table4")
    _emit(json.dumps(model.to_dict(), indent=1) + "\n", args.out)
    return 0


def _model(args) -> PredictionModel:
    return resolve_model(args.model or "table4")


def cmd_predict(args) -> int:
    if args.ns is None:
        raise UsageError("predict needs --ns")
    model = _model(args)
    prof = predict_profile(model, args.ns)
    cfg = _auth_cfg(args)
    if prof.M == spec_from_name(args.spec).modulation_order:
        eps_a2 = raw_auth_ber(prof, DemodulationRule.from_spec(spec_from_name(args.spec)))
        mean, p0 = decoded_auth_ber_exact(eps_a2, cfg)
        print(f"f={args.ns:g} k_a={cfg.k_a}: eps_a2={eps_a2:.4f} eps_a1={mean:.4f} P(eps_a1=0)={p0:.4f}",
              file=sys.stderr)
    _emit(json.dumps(prof.to_dict(), indent=1) + "\n", args.out)
    return 0


def cmd_optimize(args) -> int:
    model = _model(args)
    result = optimize(
        model,
        args.delta if args.delta is not None else 0.012,
        args.ns if args.ns is not None else 10,
        baseline=_auth_cfg(args),
        framing=PROBABILITY if args.probability is not None else MEAN,
        p_success=args.probability if args.probability is not None else 0.5,
        covertness_trials=args.covertness_trials,
        seed=args.seed,
    )
    print(result.report(), end="")
    for note in result.notes:
        print(f"warning: {note}", file=sys.stderr)
    if args.out:
        Path(args.out).write_text(result.to_json())
        print(f"wrote {args.out}")
    return 0


def cmd_experiment(args) -> int:
    plan = ExperimentPlan.load(args.plan)
    if args.trials is not None:
        plan = ExperimentPlan.from_dict({**plan.__dict__, "trials": args.trials})
    if args.seed is not None:
        plan.master_seed = args.seed
    out = run_plan(plan, args.out, args.workers)
    for p in out.paths.values():
        print(f"wrote {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", default="default", choices=("default", "binary"))
    common.add_argument("--out")

    auth = argparse.ArgumentParser(add_help=False)
    auth.add_argument("--strategy", type=int, choices=(1, 2))
    auth.add_argument("--k-a", dest="k_a", type=int, choices=(147, 179, 247))
    auth.add_argument("--delta", type=float)

    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=int, default=DEFAULT_SEED)

    batch = argparse.ArgumentParser(add_help=False)
    batch.add_argument("--trials", type=int, default=100)
    batch.add_argument("--workers", type=int, default=1)

    p = argparse.ArgumentParser(prog="lcac", description="Anti-copy multilevel barcode toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common, auth, seeded], help="encode a source file into a barcode image")
    g.add_argument("--source", required=True)
    g.add_argument("--key", required=True, help="hex key file")
    g.add_argument("--new-key", action="store_true", help="create the key file from --seed")
    g.add_argument("--auth", help="authentication message (k_a bits); random from --seed if omitted")
    g.add_argument("--layout-seed", type=int, default=0)
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("decode", parents=[common], help="recover the source message from an image")
    d.add_argument("image")
    d.set_defaults(func=cmd_decode)

    v = sub.add_parser("verify", parents=[common, auth], help="authenticate an image (exit 1 if Illegal)")
    v.add_argument("image")
    v.add_argument("--key", required=True)
    v.add_argument("--auth-meta")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("channel", parents=[common, auth, seeded, batch], help="pass an image or trials through a channel")
    c.add_argument("image", nargs="?")
    c.add_argument("--profile", default="legal", help="legal, noiseless, table2:<tag>, table4:<n> or a JSON path")
    c.set_defaults(func=cmd_channel)

    a = sub.add_parser("attack", parents=[common, auth, seeded, batch], help="direct or synthesized copy attack")
    a.add_argument("image", nargs="?")
    a.add_argument("--profile", help="illegal profile for a direct copy (default table2:a)")
    a.add_argument("--ns", type=int, help="synthesized sample count")
    a.add_argument("--model", help="prediction model JSON for counts outside the bundled series")
    a.set_defaults(func=cmd_attack)

    e = sub.add_parser("estimate", parents=[common], help="estimate a profile from a samples CSV")
    e.add_argument("samples")
    e.set_defaults(func=cmd_estimate)

    f = sub.add_parser("fit", parents=[common], help="fit prediction functions to a profile series")
    f.add_argument("profiles", nargs="*", help="profile JSON files carrying an n_s field (default: bundled series)")
    f.set_defaults(func=cmd_fit)

    pr = sub.add_parser("predict", parents=[common, auth], help="predicted profile and BERs at a sample count")
    pr.add_argument("--model")
    pr.add_argument("--ns", type=float)
    pr.set_defaults(func=cmd_predict)

    o = sub.add_parser("optimize", parents=[common, auth, seeded], help="choose the BCH preset")
    o.add_argument("--model")
    o.add_argument("--ns", type=float, help="target synthesized sample count (default 10)")
    o.add_argument("--probability", type=float, help="use P(eps_a1 <= delta) >= p as attack success")
    o.add_argument("--covertness-trials", type=int, default=0)
    o.set_defaults(func=cmd_optimize)

    x = sub.add_parser("experiment", parents=[common], help="run an experiment plan")
    x.add_argument("plan", help=f"plan file or bundled name ({', '.join(profiles.bundled_plans())})")
    x.add_argument("--trials", type=int)
    x.add_argument("--seed", type=int)
    x.add_argument("--workers", type=int)
    x.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (LcacError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"lcac {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
