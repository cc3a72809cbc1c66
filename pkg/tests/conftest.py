import numpy as np
import pytest

from hawkmix import HyperParams, PlantedSpec, generate, mask_static_edges, train


@pytest.fixture(scope="session")
def trained_planted():
    """A planted 2-aspect network with masked probe pairs and a trained model.

    Shared across eval tests to keep the suite fast; everything is seeded.
    """
    spec = PlantedSpec(
        n_aspects=2, nodes_per_aspect=40, mu0=1.0, alpha0=0.3, delta0=1.0,
        horizon=15.0, cross_aspect_prob=0.05,
    )
    net, truth = generate(spec, np.random.default_rng(42))
    train_net, positives, negatives = mask_static_edges(net, 150, np.random.default_rng(7))
    hyper = HyperParams(
        n_aspects=2, history_len=5, dim=8, n_negatives=5,
        batch_size=100, epochs=20, lr=0.01, seed=3,
    )
    losses = []
    params = train(train_net, hyper, on_epoch=lambda e, l, w: losses.append(l))
    return {
        "net": net,
        "truth": truth,
        "train_net": train_net,
        "positives": positives,
        "negatives": negatives,
        "params": params,
        "losses": losses,
    }
