#!/usr/bin/env python3
"""Model-only sweep: predicted eps_a2, eps_a1 and P(eps_a1 = 0) for each
BCH preset over the synthesized-sample count, plus the break-even count."""

import argparse

from lcac.auth import AuthConfig
from lcac.bch import PRESETS
from lcac.experiments import resolve_model
from lcac.optimize import break_even
from lcac.predict import DemodulationRule, decoded_auth_ber_exact, predict_profile, raw_auth_ber


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--model", default="table4")
    ap.add_argument("--delta", type=float, default=0.012)
    ap.add_argument("--rule", choices=["printed", "bit_exact"], default="printed")
    args = ap.parse_args()
    model = resolve_model(args.model)
    rule = DemodulationRule.from_spec(mode=args.rule)
    cfgs = [AuthConfig.preset(k) for (_, k) in sorted(PRESETS)]
    print("f    eps_a2   " + "".join(f"k_a={c.k_a}: eps_a1  P0      " for c in cfgs))
    lo, hi = model.extrapolation_range
    for f in range(int(lo), int(hi) + 1):
        e2 = raw_auth_ber(predict_profile(model, f), rule)
        cols = "".join(f"{m:>14.5f}{p:>8.4f}      " for m, p in (decoded_auth_ber_exact(e2, c) for c in cfgs))
        print(f"{f:<4d}{e2:>9.5f}{cols}")
    for c in cfgs:
        print(f"break-even k_a={c.k_a} t_a={c.t_a}: {break_even(model, args.delta, c)}")


if __name__ == "__main__":
    main()
