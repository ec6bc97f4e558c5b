"""Acceptance criteria 1-14, one test per criterion.

Each test records a one-line verdict that is printed in the pytest terminal
summary (and by ``python tests/test_acceptance.py``). Criteria 1-10 need no
training. Criteria 11-14 read a finished run directory holding ``results.csv``
and ``fits.json`` from ``advbench sweep`` / ``advbench analyze``; it defaults to
``runs/desk`` and can be moved with ``ADVBENCH_ACCEPTANCE_RUN``.
"""

import json
import os
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from advbench.pipeline import analyze  # noqa: E402
from advbench.runio import TABLE2_FNN32_PERCENT, read_results_csv, table3_fixture  # noqa: E402
from advbench.trend import AccuracySeries, constant_fit  # noqa: E402

RUN_DIR = Path(os.environ.get("ADVBENCH_ACCEPTANCE_RUN",
                              Path(__file__).resolve().parent.parent / "runs" / "desk"))
CNNS = ("cnn3", "cnn4", "cnn6", "cnn8")

# published fits for eps <= 2, as (intercept, slope[, curvature]) or (scale, rate)
PUBLISHED_FITS = {
    "cnn3": {"linear": (0.592, -0.294), "exponential": (0.757, -1.02), "logarithmic": (0.197, -0.258),
             "quadratic": (0.896, -1.34, 0.512), "power": (0.187, -0.623)},
    "cnn4": {"linear": (0.577, -0.283), "exponential": (0.725, -0.999), "logarithmic": (0.2, -0.245),
             "quadratic": (0.854, -1.23, 0.466), "power": (0.19, -0.612)},
    "cnn6": {"linear": (0.66, -0.362), "exponential": (0.858, -1.29), "logarithmic": (0.189, -0.294),
             "quadratic": (0.973, -1.44, 0.528), "power": (0.166, -0.779)},
    "cnn8": {"linear": (0.853, -0.332), "exponential": (0.932, -0.662), "logarithmic": (0.439, -0.239),
             "quadratic": (1.03, -0.936, 0.296), "power": (0.418, -0.414)},
}
PUBLISHED_QUADRATIC_R2 = {"cnn3": 0.794, "cnn4": 0.805, "cnn6": 0.907, "cnn8": 0.947}
PUBLISHED_DECELERATION = {"cnn3": 1.02, "cnn4": 0.932, "cnn6": 1.056, "cnn8": 0.592}
PUBLISHED_CORRELATION = {
    ("fnn1-256", "fnn2"): 0.09407, ("fnn1-256", "cnn3"): 0.09382, ("fnn1-256", "cnn4"): 0.18296,
    ("fnn1-256", "cnn6"): 0.07111, ("fnn1-256", "cnn8"): 0.27618, ("fnn2", "cnn3"): 0.61470,
    ("fnn2", "cnn4"): 0.58903, ("fnn2", "cnn6"): 0.53898, ("fnn2", "cnn8"): 0.35413,
    ("cnn3", "cnn4"): 0.98765, ("cnn3", "cnn6"): 0.97756, ("cnn3", "cnn8"): 0.82924,
    ("cnn4", "cnn6"): 0.97819, ("cnn4", "cnn8"): 0.88976, ("cnn6", "cnn8"): 0.89334,
}

VERDICTS = {}


def record(number, ok, detail):
    VERDICTS[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, detail


_FIXTURE = {}


def fixture_analysis():
    if not _FIXTURE:
        result = table3_fixture()
        started = time.perf_counter()
        doc = analyze(result)
        _FIXTURE.update(result=result, doc=doc, seconds=time.perf_counter() - started)
    return _FIXTURE["result"], _FIXTURE["doc"]


def percent_series(result, model_id):
    s = result.series(model_id)
    return AccuracySeries(model_id, s.epsilons, [100 * v for v in s.accuracies], "percent")


# deterministic, on the published sweep


def test_criterion_01_constant_fits():
    result, _ = fixture_analysis()
    q = constant_fit(percent_series(result, "fnn2"))
    p = constant_fit(percent_series(result, "fnn1-256"))
    ok = abs(q - 90.18) <= 0.01 and abs(p - 88.06) <= 0.3
    record(1, ok, f"fnn2 mean {q:.4f} (90.18 +- 0.01), fnn1 mean {p:.4f} (88.06 +- 0.3)")


def test_criterion_02_fits_up_to_2():
    _, doc = fixture_analysis()
    fits = doc["windows"]["2"]["fits"]
    worst_quad = worst_other = worst_r2 = 0.0
    for m in CNNS:
        for family, expected in PUBLISHED_FITS[m].items():
            got = fits[m][family]["coefficients"]
            err = max(abs(g - e) for g, e in zip(got, expected))
            if family == "quadratic":
                worst_quad = max(worst_quad, err)
            else:
                worst_other = max(worst_other, err)
        worst_r2 = max(worst_r2, abs(fits[m]["quadratic"]["r2"] - PUBLISHED_QUADRATIC_R2[m]))
    ok = worst_quad <= 0.02 and worst_r2 <= 0.03 and worst_other <= 0.03
    record(2, ok, f"max quadratic coef error {worst_quad:.4f} (<= 0.02), quadratic r2 error "
                  f"{worst_r2:.4f} (<= 0.03), other families {worst_other:.4f} (<= 0.03)")


def test_criterion_03_decelerations():
    _, doc = fixture_analysis()
    window = doc["windows"]["2"]
    decel = {m: window["quadratic"][m]["deceleration"] for m in CNNS}
    worst = max(abs(decel[m] - PUBLISHED_DECELERATION[m]) for m in CNNS)
    ratio = window["deceleration_ratio"]["ratio"]
    ok = worst <= 0.04 and 0.5 <= ratio <= 0.7 and window["deceleration_ratio"]["model"] == "cnn8"
    record(3, ok, "decelerations " + ", ".join(f"{m} {decel[m]:.4f}" for m in CNNS)
           + f" (max error {worst:.4f} <= 0.04); cnn8 ratio {ratio:.4f} in [0.5, 0.7]")


def test_criterion_04_slope_intersections():
    _, doc = fixture_analysis()
    cross = {frozenset(e["models"]): e.get("epsilon") for e in doc["windows"]["2"]["intersections"]}
    e3, e4, e6 = (cross[frozenset(("cnn8", m))] for m in ("cnn3", "cnn4", "cnn6"))
    ok = all(v is not None for v in (e3, e4, e6)) and 0.8 < e3 < 1.0 and 0.8 < e4 < 1.0 and 1.0 < e6 < 1.2
    record(4, ok, f"cnn8-cnn3 {e3:.4f}, cnn8-cnn4 {e4:.4f} in (0.8, 1.0); cnn8-cnn6 {e6:.4f} in (1.0, 1.2)")


def test_criterion_05_correlation_matrix():
    _, doc = fixture_analysis()
    corr = doc["correlation"]
    ids, mat = corr["model_ids"], np.array(corr["matrix"])
    worst = max(abs(mat[ids.index(a), ids.index(b)] - v) for (a, b), v in PUBLISHED_CORRELATION.items())
    diag = bool(np.all(np.diag(mat) == 1.0))
    c34 = mat[ids.index("cnn3"), ids.index("cnn4")]
    ok = worst <= 0.05 and diag and c34 >= 0.95 and np.array_equal(mat, mat.T)
    record(5, ok, f"max deviation from the published matrix {worst:.5f} (<= 0.05), diagonal exactly 1: "
                  f"{diag}, cnn3-cnn4 {c34:.5f} (>= 0.95)")


def test_criterion_06_quadratic_minima():
    _, doc = fixture_analysis()
    quad = doc["windows"]["2"]["quadratic"]
    minima = {m: quad[m]["minimum"] for m in CNNS}
    ok = all(v is not None and 1.0 < v < 1.5 for v in minima.values())
    record(6, ok, "vertices " + ", ".join(f"{m} {v:.4f}" for m, v in minima.items()) + " (all in (1, 1.5))")


def test_criterion_07_cnn8_power_fit_to_16():
    _, doc = fixture_analysis()
    f = doc["windows"]["16"]["fits"]["cnn8"]["power"]
    a, b = f["coefficients"]
    ok = abs(a - 0.463) <= 0.03 and abs(b + 0.313) <= 0.03 and abs(f["r2"] - 0.879) <= 0.03
    record(7, ok, f"cnn8 power fit {a:.4f} x^({b:.4f}), r2 {f['r2']:.4f} (0.463 x^-0.313, r2 0.879, +- 0.03); "
                  f"fixture analysis took {_FIXTURE['seconds']:.3f}s")


# numerical core


def test_criterion_08_gradient_checks():
    import test_autonet as ta

    started = time.perf_counter()
    for name in ta.LAYER_CASES:
        ta.test_layer_gradients_match_finite_differences(name)
    for arch_id in ta.CATALOG:
        ta.test_model_gradients_match_finite_differences(arch_id)
    record(8, True, f"{len(ta.LAYER_CASES)} layer cases and {len(ta.CATALOG)} catalog models match "
                    f"central differences (step 1e-5, rel <= 1e-4) in {time.perf_counter() - started:.1f}s")


def test_criterion_09_fgsm_properties():
    import test_attack as tk
    from advbench.zoo import build_model

    cnn = build_model("cnn3", 4)
    tk.test_zero_epsilon_is_identity(cnn)
    for eps in (0.01, 0.1, 0.3, 2.0):
        tk.test_max_norm_bound_before_clamp_is_exact(cnn, eps)
    tk.test_saturation_for_large_epsilon(cnn)
    tk.test_linear_model_first_order_loss_increase()
    record(9, True, "eps=0 identity, exact pre-clamp max-norm bound, bit-identical outputs for "
                    "eps in {1, 5, 10, 16}, first-order loss increase on the linear model")


def test_criterion_10_fit_oracle():
    import test_trend as tt

    started = time.perf_counter()
    tt.test_fits_beat_brute_force_grid()
    record(10, True, "20 random series x 5 families: no point of a 200^k grid around the returned "
                     f"coefficients has lower SSE ({time.perf_counter() - started:.1f}s)")


# stochastic, from a finished desk-scale run


def run_results():
    path = RUN_DIR / "results.csv"
    if not path.exists():
        pytest.skip(f"no sweep results at {path}; run the desk-scale pipeline first")
    return read_results_csv(path)


def test_criterion_11_benign_accuracy():
    res = run_results()
    benign = {m: res.benign(m) for m in res.model_ids}
    need = {"fnn1-256": 0.955, "fnn2": 0.965, **{m: 0.98 for m in CNNS}}
    missing = [m for m in need if benign.get(m) is None]
    ok = not missing and all(benign[m] >= t for m, t in need.items())
    detail = ", ".join(f"{m} {benign[m]:.4f} (>= {t})" for m, t in need.items() if m not in missing)
    record(11, ok, detail + (f"; missing {missing}" if missing else ""))


def test_criterion_12_fnn_plateau():
    res = run_results()
    wide = [res.pooled("fnn1-256", e) for e in res.series("fnn1-256").epsilons]
    narrow = dict(zip(res.series("fnn1-32").epsilons, res.series("fnn1-32").accuracies))
    spread = max(wide) - min(wide)
    ok = (min(wide) >= 0.80 and spread <= 0.08 and narrow[0.1] <= 0.45
          and all(v <= 0.35 for e, v in narrow.items() if e >= 0.3))
    record(12, ok, f"fnn1-256 min {min(wide):.4f} (>= 0.80), spread {spread:.4f} (<= 0.08); fnn1-32 "
                   f"{narrow[0.1]:.4f} at eps 0.1 (<= 0.45), max {max(v for e, v in narrow.items() if e >= 0.3):.4f} "
                   f"for eps >= 0.3 (<= 0.35); published fnn1-32 at 0.1: {TABLE2_FNN32_PERCENT[0] / 100:.4f}")


def test_criterion_13_cnn_collapse():
    res = run_results()
    c3, c8 = res.pooled("cnn3", 0.5), res.pooled("cnn8", 0.5)
    high = {m: [res.pooled(m, e) for e in res.series(m).epsilons if e >= 1] for m in CNNS}
    lo, hi = min(min(v) for v in high.values()), max(max(v) for v in high.values())
    ok = c3 <= 0.25 and 0.05 <= lo and hi <= 0.45 and c8 - c3 >= 0.20
    record(13, ok, f"cnn3 at 0.5 {c3:.4f} (<= 0.25); CNNs for eps >= 1 span [{lo:.4f}, {hi:.4f}] "
                   f"(within [0.05, 0.45]); cnn8 - cnn3 at 0.5 = {c8 - c3:.4f} (>= 0.20)")


def test_criterion_14_end_to_end_fits():
    path = RUN_DIR / "fits.json"
    if not path.exists():
        pytest.skip(f"no analysis at {path}; run advbench analyze on the sweep results")
    window = json.loads(path.read_text())["windows"]["2"]
    coefs = {m: window["fits"][m]["quadratic"]["coefficients"] for m in CNNS}
    decel = {m: window["quadratic"][m]["deceleration"] for m in CNNS}
    shape_ok = all(c[1] < 0 < c[2] for c in coefs.values())
    smallest = all(decel["cnn8"] < decel[m] for m in CNNS[:-1])
    record(14, shape_ok and smallest,
           "quadratic (b, c): " + ", ".join(f"{m} ({c[1]:.3f}, {c[2]:.3f})" for m, c in coefs.items())
           + "; decelerations " + ", ".join(f"{m} {d:.3f}" for m, d in decel.items())
           + " (cnn8 strictly smallest)")


def test_training_loss_decreases_over_first_three_epochs():
    from advbench.trainer import TrainReport
    from advbench.zoo import CATALOG

    reports = {m: RUN_DIR / f"{m}-s0-train.csv" for m in CATALOG}
    missing = [m for m, p in reports.items() if not p.exists()]
    if missing:
        pytest.skip(f"no training reports for {missing} in {RUN_DIR}")
    for model_id, path in reports.items():
        loss = TrainReport.read_csv(path).loss[:3]
        assert len(loss) == 3 and loss[0] > loss[1] > loss[2], (model_id, loss)


if __name__ == "__main__":
    code = pytest.main([__file__, "-q", "-p", "no:cacheprovider"])
    sys.exit(code)
