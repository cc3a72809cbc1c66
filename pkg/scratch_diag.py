"""Dev scratch: inspect learned geometry on the planted network."""
import numpy as np

from hawkmix import (
    HyperParams, PlantedSpec, generate, infer_aspect_labels, recovery_score, train,
    build_context,
)
from hawkmix.temporal_graph import NeighborEvent

spec = PlantedSpec(2, 50, 1.0, 0.3, 1.0, 20.0, 0.05)
net, truth = generate(spec, np.random.default_rng(0))
hyper = HyperParams(n_aspects=2, history_len=5, dim=16, n_negatives=5,
                    batch_size=200, epochs=20, lr=0.003, seed=1)
params = train(net, hyper)

print("identity norm mean:", np.linalg.norm(params.identity, axis=1).mean())
print("aspect norms per k:", np.linalg.norm(params.aspect, axis=2).mean(axis=0))
print("decay delta: mean", params.decay.mean(), "min", params.decay.min(), "max", params.decay.max())
print("temperature tau: mean", params.temperature.mean(), "min", params.temperature.min(), "max", params.temperature.max())

# within- vs cross-group aspect distances per aspect
for k in range(2):
    a = params.aspect[:, k, :]
    g0, g1 = a[:50], a[50:]
    w0 = np.mean([np.sum((x - y) ** 2) for x in g0[:20] for y in g0[20:40]])
    w1 = np.mean([np.sum((x - y) ** 2) for x in g1[:20] for y in g1[20:40]])
    cr = np.mean([np.sum((x - y) ** 2) for x in g0[:20] for y in g1[:20]])
    print(f"aspect {k}: within-g0 {w0:.3f} within-g1 {w1:.3f} cross {cr:.3f}")

# identity same
a = params.identity
g0, g1 = a[:50], a[50:]
w0 = np.mean([np.sum((x - y) ** 2) for x in g0[:20] for y in g0[20:40]])
cr = np.mean([np.sum((x - y) ** 2) for x in g0[:20] for y in g1[:20]])
print(f"identity: within {w0:.3f} cross {cr:.3f}")

# pi profiles for a few nodes of each group
for u in [0, 1, 2, 50, 51, 52]:
    ts = net.ev_times[u]
    acc = np.zeros(2)
    fvals = np.zeros(2)
    for t in ts:
        nbrs, tms = net.recent(u, float(t), 5)
        hist = [NeighborEvent(int(n), float(tt)) for n, tt in zip(nbrs, tms)]
        ctx = build_context(params, u, u, float(t), hist)
        acc += ctx.pis[u]
        fvals += np.array([-np.sum((params.identity[u] - ctx.contexts[k])**2) for k in range(2)])
    print(f"node {u} (group {truth.labels[u]}): mean pi {acc/len(ts)}, mean F {fvals/len(ts)}")

pred = infer_aspect_labels(params, net)
print("recovery:", recovery_score(pred, truth))
print("pred group means: g0", pred[:50].mean(), "g1", pred[50:].mean())
