"""Dev scratch: finer knob grid for planted-aspect recovery, 5 seeds."""
import itertools

import numpy as np

from hawkmix import (
    HyperParams, PlantedSpec, generate, infer_aspect_labels, recovery_score, train,
)

spec = PlantedSpec(2, 50, 1.0, 0.3, 1.0, 20.0, 0.05)
SEEDS = (1, 2, 3, 4, 5)

def run(m, lr, batch, n_neg=5, h=5):
    scores = []
    for seed in SEEDS:
        net, truth = generate(spec, np.random.default_rng(100 + seed))
        hyper = HyperParams(n_aspects=2, history_len=h, dim=m, n_negatives=n_neg,
                            batch_size=batch, epochs=20, lr=lr, seed=seed)
        params = train(net, hyper)
        pred = infer_aspect_labels(params, net)
        scores.append(recovery_score(pred, truth))
    return scores

for m, lr, batch in itertools.product([16, 32], [0.03, 0.05, 0.1], [20, 50]):
    s = run(m, lr, batch)
    print(f"m={m:2d} lr={lr:<5} batch={batch:3d} -> {['%.2f' % x for x in s]} median {np.median(s):.2f}",
          flush=True)
