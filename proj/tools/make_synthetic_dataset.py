#!/usr/bin/env python3
"""Write a synthetic, US-shaped input set for the kayacap pipeline.

The numbers are NOT observed data. GDP growth and savings follow a smooth
1970-2005 shape with recession dips; operating-capital emissions are forward
modelled from alpha=0.009, delta=0.037, ebar_K0=3059, eps_K0=1029 and split
across sectors; consumption and investment intensities decline at fixed
rates. Component totals in 2005 are pinned to 3059 / 2123.4 / 73.6 MtCO2.
Small seeded noise is applied to the other years.

    python3 tools/make_synthetic_dataset.py data/synthetic_us
"""

import argparse
import math
import pathlib

import numpy as np

FIRST, LAST, REF = 1970, 2005, 2005
ALPHA, DELTA, EBAR_K0, EPS_K0 = 0.009, 0.037, 3059.0, 1029.0
TOTAL_2005 = 3059.0 / 0.582
E_C_REF, E_I_REF = TOTAL_2005 * 0.404, TOTAL_2005 * 0.014

CAPITAL = {"energy sector": 0.80, "rail transport": 0.02, "pipeline transport": 0.01, "other manufacturing": 0.17}
CONSUMPTION = {"air transport": 0.07, "road transport": 0.55, "households": 0.15, "services": 0.15, "agriculture": 0.08}
INVESTMENT = {"iron and steel": 0.45, "machinery": 0.15}  # cement goes to its own file
CEMENT_SHARE = 0.40
RECESSIONS = {1974: -0.035, 1975: -0.03, 1980: -0.035, 1982: -0.04, 1991: -0.03, 2001: -0.025}


def macro():
    years = np.arange(FIRST, LAST + 1)
    growth = {}
    gdp = [100.0]
    sav = []
    for y in years:
        k = y - FIRST
        sav.append(0.165 - 0.0014 * k + 0.008 * math.cos(0.45 * k))
        if y > FIRST:
            growth[int(y)] = 0.0362 + 0.006 * math.sin(0.6 * k) + RECESSIONS.get(int(y), 0.0)
            gdp.append(gdp[-1] * math.exp(growth[int(y)]))
    gdp = np.array(gdp)
    return years, gdp, np.array(sav), growth


def ebar_k_backward(growth, savings):
    """RK4 from the reference year back to FIRST+1, rates of year y held on (y-1, y]."""
    h = 1.0 / 48.0
    t, v = 0.0, EBAR_K0
    out = {REF: v}

    def rhs(tt, vv, r, s):
        return -(r + DELTA) * vv + s * EPS_K0 * math.exp(-ALPHA * tt)

    for y in range(REF, FIRST + 1, -1):
        r, s = growth[y], savings[y]
        for _ in range(48):
            k1 = rhs(t, v, r, s)
            k2 = rhs(t - h / 2, v - h / 2 * k1, r, s)
            k3 = rhs(t - h / 2, v - h / 2 * k2, r, s)
            k4 = rhs(t - h, v - h * k3, r, s)
            v -= h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t -= h
        out[y - 1] = v
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("outdir", type=pathlib.Path)
    ap.add_argument("--seed", type=int, default=20090)
    ap.add_argument("--noise", type=float, default=0.005)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    years, gdp, sav, growth = macro()
    ref_i = REF - FIRST
    y_index = gdp / gdp[ref_i]
    savings = {int(y): float(s) for y, s in zip(years, sav)}
    ebar = ebar_k_backward(growth, savings)

    em_years = list(range(FIRST + 1, LAST + 1))
    comp = {"capital": [], "consumption": [], "investment": []}
    for y in em_years:
        i = y - FIRST
        t = y - REF
        s = savings[y]
        # Investment intensity: faster decline before 1982.
        inv_log = -0.020 * t if y >= 1982 else -0.020 * (1982 - REF) - 0.05 * (y - 1982)
        jitter = (lambda: 1.0) if y == REF else (lambda: 1.0 + args.noise * rng.standard_normal())
        comp["capital"].append(y_index[i] * ebar[y] * jitter())
        comp["consumption"].append(E_C_REF * y_index[i] * (1 - s) / (1 - savings[REF]) * math.exp(-0.028 * t) * jitter())
        comp["investment"].append(E_I_REF * y_index[i] * s / savings[REF] * math.exp(inv_log) * jitter())

    args.outdir.mkdir(parents=True, exist_ok=True)
    header = "sector," + ",".join(str(y) for y in em_years)

    def row(name, values):
        return name + "," + ",".join(f"{v:.4f}" for v in values)

    lines = ["# SYNTHETIC data shaped like US sectoral CO2 emissions, MtCO2/yr. Not observed values.", header]
    for group, shares in (("capital", CAPITAL), ("consumption", CONSUMPTION), ("investment", INVESTMENT)):
        for name, w in shares.items():
            lines.append(row(name, [w * v for v in comp[group]]))
    (args.outdir / "sectors.csv").write_text("\n".join(lines) + "\n")

    cement = ["# SYNTHETIC cement process emissions, MtCO2/yr. Not observed values.", header,
              row("cement", [CEMENT_SHARE * v for v in comp["investment"]])]
    (args.outdir / "cement.csv").write_text("\n".join(cement) + "\n")

    macro_lines = ["# SYNTHETIC GDP (index, 1970 = 100) and gross savings rate. Not observed values.",
                   "year,gdp,savings_rate"]
    macro_lines += [f"{y},{g:.6f},{s:.6f}" for y, g, s in zip(years, gdp, sav)]
    (args.outdir / "macro.csv").write_text("\n".join(macro_lines) + "\n")


if __name__ == "__main__":
    main()
