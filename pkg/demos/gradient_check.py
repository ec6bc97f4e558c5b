"""Compare analytic gradients with central differences for every catalog model.

Run:  python demos/gradient_check.py

A ReLU or a max-pool switch can sit closer to a sampled point than the
difference step. There the two estimates disagree for reasons unrelated to the
backward pass, so coordinates whose perturbation flips an activation pattern
are counted separately instead of compared.
"""

import numpy as np

from advbench.autonet import softmax_xent
from advbench.ndcore import Rng
from advbench.zoo import CATALOG, build_model

STEP = 1e-5


def loss_and_pattern(model, x, y):
    logits, acts = model.forward(x)
    pattern = [(c > 0).tobytes() if layer.kind == "relu" else c.argmax.tobytes()
               for layer, c in zip(model.layers, acts.caches) if layer.kind in ("relu", "pool")]
    return softmax_xent(logits, y)[0], pattern


rng = Rng(7)
x = rng.uniform(0.0, 1.0, 784).reshape(1, 1, 28, 28)
y = np.array([3])

for arch_id in CATALOG:
    model = build_model(arch_id, seed=1)
    param_grads, _, _ = model.backward(model.forward(x)[1], y)
    _, base = loss_and_pattern(model, x, y)
    worst, compared, kinks = 0.0, 0, 0
    for tensor, grad in zip(model.parameters, param_grads):
        flat, analytic = tensor.reshape(-1), grad.reshape(-1)
        for i in rng.permutation(flat.size)[:8]:
            old = flat[i]
            flat[i] = old + STEP
            up, pattern_up = loss_and_pattern(model, x, y)
            flat[i] = old - STEP
            down, pattern_down = loss_and_pattern(model, x, y)
            flat[i] = old
            if pattern_up != base or pattern_down != base:
                kinks += 1
                continue
            numeric = (up - down) / (2 * STEP)
            worst = max(worst, abs(numeric - analytic[i]) / max(abs(numeric), abs(analytic[i]), 1e-8))
            compared += 1
    print(f"{arch_id:9s} worst relative gap {worst:.1e} over {compared} coordinates, "
          f"{kinks} skipped next to a kink")
