"""Refit the published adversarial-accuracy sweep and draw the trend plots.

Run:  python demos/published_trends.py [out_dir]

The sweep values ship with the package (``table3_fixture``), so this script
needs neither MNIST nor any training. It prints the fits over eps <= 2, the
deceleration of each CNN curve, where the slope lines cross, and the pairwise
correlations, then writes two SVG figures.
"""

import sys
from pathlib import Path

from advbench.pipeline import analyze
from advbench.runio import plot_accuracy_decline, table3_fixture
from advbench.trend import fit

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo-output")
out.mkdir(parents=True, exist_ok=True)

result = table3_fixture()
doc = analyze(result)
window = doc["windows"]["2"]

print("Constant fits (mean accuracy over the grid):")
for model_id, value in doc["constant_fit_percent"].items():
    print(f"  {model_id:9s} {value:6.2f}%")

CNNS = ("cnn3", "cnn4", "cnn6", "cnn8")

print("\nBest family per model for eps <= 2 (by r2):")
for model_id, fits in window["fits"].items():
    best = max(fits.values(), key=lambda f: f["r2"])
    print(f"  {model_id:9s} {best['family']:12s} {best['equation']:28s} r2={best['r2']:.3f}")

# The CNN curves all bend upward; a smaller quadratic coefficient means the
# model keeps losing accuracy for longer before the curve flattens.
print("\nDeceleration (twice the quadratic coefficient) and vertex:")
for model_id in CNNS:
    q = window["quadratic"][model_id]
    vertex = "none" if q["minimum"] is None else f"{q['minimum']:.3f}"
    print(f"  {model_id:5s} {q['deceleration']:.3f}  vertex at eps={vertex}")
ratio = window["deceleration_ratio"]
print(f"  {ratio['model']} relative to the mean of the others: {ratio['ratio']:.3f}")

print("\nWhere the slope lines cross:")
for cross in window["intersections"]:
    a, b = cross["models"]
    print(f"  {a} / {b}: eps = {cross['epsilon']:.3f}")

corr = doc["correlation"]
ids = corr["model_ids"]
print("\n|r| between accuracy curves:")
print("          " + " ".join(f"{m:>8s}" for m in ids))
for m, row in zip(ids, corr["matrix"]):
    print(f"  {m:8s}" + " ".join(f"{v:8.4f}" for v in row))

cnn_series = [result.series(m) for m in CNNS]
quad = {s.model_id: fit(s, "quadratic", 2.0) for s in cnn_series}
plot_accuracy_decline(cnn_series, quad, out / "cnn-decline.svg",
                      title="CNN accuracy under FGSM with quadratic fits")
plot_accuracy_decline([], quad, out / "cnn-slopes.svg", mode="slopes",
                      title="Slope of the quadratic fits")
print(f"\nwrote {out / 'cnn-decline.svg'} and {out / 'cnn-slopes.svg'}")
