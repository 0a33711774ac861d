#!/usr/bin/env python3
"""Generate the bundled synthetic growth panel (data/growth_panel.csv).

Three survey rounds per child, long format. The outcome is height in cm,
the treatment flag marks a recent diarrhea episode at the visit, and the
cumulative column counts episode time (in visit-interval units) since the
first round, so it starts at zero for every child. Covariates follow the
usual survey layout: time-varying nutrition measures with an l_ prefix,
baseline characteristics with a v_ prefix.

The data are entirely synthetic. Assignment depends only on recorded
covariates, and height responds to cumulative episode time with a fixed
coefficient of -0.35 cm per interval unit, so all three estimators in the
`estimate` subcommand have something real to find.
"""

import pathlib

import numpy as np

N = 450
PSI = -0.35
SEED = 20240815


def expit(z):
    return 1.0 / (1.0 + np.exp(-z))


def main():
    rng = np.random.default_rng(SEED)

    age = rng.integers(36, 73, N).astype(float)  # months at the first round
    mheight = np.round(rng.normal(152.0, 5.0, N), 1)
    flood = rng.binomial(1, 0.3, N).astype(float)
    frailty = rng.normal(0.0, 1.0, N)  # shared child-level effect

    # sanitation status, mostly stable across rounds
    sanit = np.empty((N, 3))
    sanit[:, 0] = rng.binomial(1, 0.55, N)
    for k in (1, 2):
        flip = rng.random(N) < 0.1
        sanit[:, k] = np.where(flip, 1.0 - sanit[:, k - 1], sanit[:, k - 1])

    # height without any episodes: growth curve plus child effect and noise
    y0 = np.empty((N, 3))
    for k in range(3):
        y0[:, k] = (
            62.0
            + 0.55 * (age + 6.0 * k)
            + 0.05 * (mheight - 152.0)
            + 1.6 * frailty
            + rng.normal(0.0, 0.9, N)
        )

    a = np.zeros((N, 3), dtype=int)
    cum = np.zeros((N, 3))
    y = np.zeros((N, 3))
    waz = np.zeros((N, 3))
    muac = np.zeros((N, 3))
    for k in range(3):
        y[:, k] = y0[:, k] + PSI * cum[:, k]
        waz[:, k] = np.round(
            -0.8 + 0.6 * frailty - 0.3 * cum[:, k] + rng.normal(0.0, 0.5, N), 3
        )
        muac[:, k] = np.round(
            14.2 + 0.5 * frailty - 0.2 * cum[:, k] + rng.normal(0.0, 0.35, N), 2
        )
        expected_height = 62.0 + 0.55 * (age + 6.0 * k)
        logit = (
            -0.9
            - 0.5 * waz[:, k]
            - 0.5 * sanit[:, k]
            + 0.55 * flood
            - 0.04 * (y[:, k] - expected_height)
        )
        a[:, k] = rng.binomial(1, expit(logit))
        if k < 2:
            # episode time accrued before the next round: visits with an
            # active episode carry most of it, but episodes can also start
            # and resolve entirely between rounds
            burden = a[:, k] * rng.uniform(0.15, 0.75, N)
            burden += rng.binomial(1, 0.25, N) * rng.uniform(0.05, 0.45, N)
            cum[:, k + 1] = cum[:, k] + np.minimum(burden, 0.95)

    out = pathlib.Path(__file__).resolve().parent.parent / "data" / "growth_panel.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w") as fh:
        fh.write("id,visit,y,a,cum_a,l_muac,l_waz,l_sanit,v_age,v_mheight,v_flood\n")
        for i in range(N):
            for k in range(3):
                fh.write(
                    f"c{i:03d},{k},{y[i, k]:.10g},{a[i, k]},{cum[i, k]:.10g},"
                    f"{muac[i, k]:.10g},{waz[i, k]:.10g},{sanit[i, k]:.0f},"
                    f"{age[i]:.0f},{mheight[i]:.10g},{flood[i]:.0f}\n"
                )
    print(f"wrote {out} ({N} children, 3 rounds)")


if __name__ == "__main__":
    main()
