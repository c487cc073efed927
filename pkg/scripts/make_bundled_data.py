#!/usr/bin/env python3
"""Regenerate the bundled example datasets under data/.

Both files are synthetic stand-ins with the table shapes the experiment
configs expect: a 228 x 17 clinical-trial-style table and a 240 x 7
aggregated-expression-style table. Times come from a proportional-hazards
model with an exponential baseline; censoring times are independent
exponentials calibrated to the target fraction. Deterministic via fixed
seeds, so re-running this script reproduces the committed files byte for
byte.
"""
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from survbv.dataio import _calibrate_censoring_rate, write_dataset  # noqa: E402
from survbv.survival import SurvivalDataset  # noqa: E402

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "data")


def _ph_times(rng, eta, censoring_target, base_rate=0.05):
    uncensored = rng.standard_exponential(eta.size) / (base_rate * np.exp(eta))
    rate = _calibrate_censoring_rate(uncensored, censoring_target)
    censoring = rng.standard_exponential(eta.size) / rate
    times = np.minimum(uncensored, censoring)
    events = (uncensored <= censoring).astype(int)
    return np.maximum(times, 1e-8), events


def make_clinical_style(path):
    rng = np.random.default_rng(20260301)
    n = 228
    cols = {}
    cols["trt"] = rng.integers(0, 2, n).astype(float)
    cols["age"] = rng.normal(50.0, 10.0, n)
    cols["sex"] = (rng.random(n) < 0.88).astype(float)
    cols["ascites"] = (rng.random(n) < 0.08).astype(float)
    cols["hepato"] = (rng.random(n) < 0.5).astype(float)
    cols["spiders"] = (rng.random(n) < 0.28).astype(float)
    cols["edema"] = rng.choice([0.0, 0.5, 1.0], size=n, p=[0.84, 0.10, 0.06])
    cols["bili"] = np.exp(rng.normal(0.6, 1.0, n))
    cols["chol"] = np.exp(rng.normal(5.8, 0.4, n))
    cols["albumin"] = rng.normal(3.5, 0.4, n)
    cols["copper"] = np.exp(rng.normal(4.3, 0.8, n))
    cols["alk_phos"] = np.exp(rng.normal(7.3, 0.7, n))
    cols["ast"] = np.exp(rng.normal(4.7, 0.45, n))
    cols["trig"] = np.exp(rng.normal(4.7, 0.4, n))
    cols["platelet"] = rng.normal(260.0, 90.0, n)
    cols["protime"] = rng.normal(10.7, 1.0, n)
    cols["stage"] = rng.choice([1.0, 2.0, 3.0, 4.0], size=n, p=[0.07, 0.26, 0.39, 0.28])

    names = list(cols)
    X = np.column_stack([cols[c] for c in names])
    # effects on the standardized scale so units do not matter
    Xs = (X - X.mean(axis=0)) / X.std(axis=0)
    beta = np.zeros(len(names))
    for feature, effect in [
        ("age", 0.25), ("edema", 0.3), ("bili", 0.8), ("albumin", -0.35),
        ("copper", 0.3), ("ast", 0.2), ("protime", 0.3), ("stage", 0.35),
    ]:
        beta[names.index(feature)] = effect
    times, events = _ph_times(np.random.default_rng(20260302), Xs @ beta, 0.55)
    data = SurvivalDataset(X, np.round(times, 1) + 0.05, events, tuple(names))
    write_dataset(data, path)
    print(f"{path}: n={data.n} p={data.p} censored={1 - data.events.mean():.3f}")


def make_expression_style(path):
    rng = np.random.default_rng(20260401)
    n = 240
    names = [
        "cluster_sig_1", "cluster_sig_2", "cluster_sig_3", "cluster_sig_4",
        "marker_gene", "histology_1", "histology_2",
    ]
    X = np.column_stack(
        [
            rng.normal(0.0, 1.0, n),
            rng.normal(0.0, 1.0, n),
            rng.normal(0.0, 1.0, n),
            rng.normal(0.0, 1.0, n),
            rng.normal(0.0, 1.3, n),
            (rng.random(n) < 0.35).astype(float),
            (rng.random(n) < 0.25).astype(float),
        ]
    )
    Xs = (X - X.mean(axis=0)) / X.std(axis=0)
    beta = np.array([0.6, -0.5, 0.35, -0.25, 0.3, 0.2, -0.15])
    times, events = _ph_times(np.random.default_rng(20260402), Xs @ beta, 0.45)
    data = SurvivalDataset(X, np.round(times, 2) + 0.005, events, tuple(names))
    write_dataset(data, path)
    print(f"{path}: n={data.n} p={data.p} censored={1 - data.events.mean():.3f}")


if __name__ == "__main__":
    os.makedirs(OUT_DIR, exist_ok=True)
    make_clinical_style(os.path.join(OUT_DIR, "pbc_like.csv"))
    make_expression_style(os.path.join(OUT_DIR, "lymphoma_like.csv"))
