"""Ad-hoc finite-difference check of the gradient engine (dev scratch)."""
import numpy as np

from hawkmix import (
    HyperParams, ModelParams, LossSample, TemporalEdge, NeighborEvent,
    sample_loss, gradients,
)
from hawkmix.params import softplus_inv


def random_fixture(rng, use_attention=True, use_gumbel=True, n_hist=3, m=4, k=3):
    hyper = HyperParams(
        n_aspects=k, history_len=max(n_hist, 1), dim=m, n_negatives=2,
        batch_size=4, epochs=1, lr=0.003, seed=0,
        use_attention=use_attention, use_gumbel=use_gumbel,
    )
    n = 9
    params = ModelParams(
        hyper=hyper,
        identity=rng.normal(0, 0.6, (n, m)),
        aspect=rng.normal(0, 0.6, (n, k, m)),
        rho=rng.normal(0, 0.5, n),
        theta=rng.normal(0, 0.5, n),
        attn_w=np.eye(m) + rng.normal(0, 0.2, (m, m)),
        attn_a=rng.normal(0, 0.4, 2 * m),
    )
    u, v = 0, 1
    t = 0.9
    hist_nodes = rng.integers(2, n, size=n_hist)
    hist_times = np.sort(rng.uniform(0, t, size=n_hist))
    hist = [NeighborEvent(int(h), float(tt)) for h, tt in zip(hist_nodes, hist_times)]
    negs = rng.integers(2, n, size=2)
    noise = None
    if use_gumbel:
        noise = {}
        for node in [u] + [h for h, _ in hist]:
            if node not in noise:
                noise[node] = -np.log(-np.log(rng.random(k)))
    sample = LossSample(TemporalEdge(u, v, t), hist, np.asarray(negs), noise)
    return params, sample


def fd_check(params, sample, h=1e-5):
    gs = gradients(params, sample)
    worst = 0.0
    worst_name = ""

    def check(name, arr, idx, analytic):
        nonlocal worst, worst_name
        orig = arr[idx]
        arr[idx] = orig + h
        lp = sample_loss(params, sample)
        arr[idx] = orig - h
        lm = sample_loss(params, sample)
        arr[idx] = orig
        fd = (lp - lm) / (2 * h)
        rel = abs(fd - analytic) / max(abs(fd), abs(analytic), 1e-4)
        if rel > worst:
            worst, worst_name = rel, f"{name}{idx} fd={fd:.8g} an={analytic:.8g}"

    m = params.hyper.dim
    k = params.hyper.n_aspects
    touched = set(gs.d_identity)
    for node in range(params.node_count):
        for i in range(m):
            an = gs.d_identity[node][i] if node in touched else 0.0
            check("I", params.identity, (node, i), an)
        for kk in range(k):
            for i in range(m):
                an = gs.d_aspect[node][kk, i] if node in touched else 0.0
                check("A", params.aspect, (node, kk, i), an)
        check("rho", params.rho, (node,), gs.d_rho.get(node, 0.0))
        check("theta", params.theta, (node,), gs.d_theta.get(node, 0.0))
    for i in range(m):
        for j in range(m):
            check("W", params.attn_w, (i, j), gs.d_attn_w[i, j])
    for i in range(2 * m):
        check("a", params.attn_a, (i,), gs.d_attn_a[i])
    return worst, worst_name


rng = np.random.default_rng(7)
cases = [
    dict(use_attention=True, use_gumbel=True, n_hist=3),
    dict(use_attention=True, use_gumbel=True, n_hist=0),
    dict(use_attention=False, use_gumbel=True, n_hist=3),
    dict(use_attention=True, use_gumbel=False, n_hist=2),
    dict(use_attention=False, use_gumbel=False, n_hist=1),
]
overall = 0.0
for case in cases:
    for rep in range(6):
        params, sample = random_fixture(rng, **case)
        w, name = fd_check(params, sample)
        overall = max(overall, w)
        print(f"{case} rep{rep}: worst rel err {w:.3e}  at {name}")
print("OVERALL WORST:", overall)
