"""Train two small models on part of MNIST and watch FGSM take them apart.

Run:  ADVBENCH_DATA_DIR=/path/to/mnist python demos/train_and_attack.py [out_dir]

This is a few-minute version of the full benchmark: fnn1-32 and cnn3 see the
first 10,000 training images, then both are attacked on the first 1,000 test
images over the usual epsilon grid. One digit is exported as PGM images so the
perturbation can be inspected by eye.
"""

import sys
import time
from pathlib import Path

from advbench.attack import export_grid
from advbench.errors import AdvbenchError
from advbench.mnist import default_data_dir, load_split
from advbench.pipeline import sweep_model
from advbench.runio import TABLE3_EPSILONS, SweepResult
from advbench.trainer import TrainConfig, train
from advbench.zoo import build_model, get_spec

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo-output")
try:
    full = load_split(default_data_dir(), "train")
except AdvbenchError as exc:
    sys.exit(f"{exc}\nset ADVBENCH_DATA_DIR to a directory holding the four MNIST IDX files")
train_set, holdout = full.head(10_000, "train"), full.subset(slice(50_000, 52_000), "holdout")
test_set = load_split(default_data_dir(), "test").head(1_000, "test")

records = []
# the CNN gets a larger starting rate than its default so three epochs suffice
for arch_id, overrides in (("fnn1-32", {}), ("cnn3", {"learning_rate": 0.05})):
    config = TrainConfig.default_for(get_spec(arch_id), max_epochs=3, **overrides)
    started = time.perf_counter()
    model, report = train(build_model(arch_id, seed=0), train_set, holdout, config)
    print(f"{arch_id}: {report.epochs_run} epochs in {time.perf_counter() - started:.0f}s, "
          f"holdout accuracy {report.holdout_accuracy[-1]:.3f}")
    records += sweep_model(model, test_set, (0.0, *TABLE3_EPSILONS))
    if arch_id == "cnn3":
        paths = export_grid(model, test_set, 0, (0.1, 0.3, 1.0), out / "digits")
        print(f"  exported {len(paths)} PGM images to {out / 'digits'}")

result = SweepResult(tuple(records))
print("\n  eps    " + "  ".join(f"{m:>8s}" for m in result.model_ids))
for eps in (0.0, *TABLE3_EPSILONS):
    print(f"  {eps:5g}  " + "  ".join(f"{result.pooled(m, eps):8.3f}" for m in result.model_ids))
