"""Dev scratch: knob grid for planted-aspect recovery."""
import itertools
import sys

import numpy as np

from hawkmix import (
    HyperParams, PlantedSpec, generate, infer_aspect_labels, recovery_score, train,
)

spec = PlantedSpec(2, 50, 1.0, 0.3, 1.0, 20.0, 0.05)

def run(m, lr, batch, seeds=(1, 2, 3)):
    scores = []
    for seed in seeds:
        net, truth = generate(spec, np.random.default_rng(100 + seed))
        hyper = HyperParams(n_aspects=2, history_len=5, dim=m, n_negatives=5,
                            batch_size=batch, epochs=20, lr=lr, seed=seed)
        params = train(net, hyper)
        pred = infer_aspect_labels(params, net)
        scores.append(recovery_score(pred, truth))
    return scores

for m, lr, batch in itertools.product([4, 8, 16], [0.003, 0.01, 0.03], [50, 200]):
    scores = run(m, lr, batch)
    print(f"m={m:2d} lr={lr:<6} batch={batch:3d} -> scores {scores} median {np.median(scores):.2f}",
          flush=True)
