"""Closed-form pieces of the connection-rate model.

The raw rate of a source node u linking to a target v mixes per-aspect
intensities: each aspect combines a base term (identity similarity scaled by
aspect-embedding spread) with excitation from u's recent neighbors, weighted
by graph attention, their own aspect activeness, and an exponential time
decay. Aspect weights come from a temperature-scaled softmax over context
similarities, optionally perturbed with Gumbel noise during training.

All functions here are pure in (params, inputs, explicit RNG).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .params import ModelParams

LEAKY_SLOPE = 0.2


def similarity(x, y) -> float:
    """Negative squared Euclidean distance; 0 iff x == y, otherwise < 0."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    d = x - y
    return float(-np.dot(d, d))


def kernel(delta: float, dt: float) -> float:
    """Time-decay weight exp(-delta * dt) for an event ``dt`` in the past."""
    if dt < 0:
        raise ValueError("dt must be >= 0: history events precede the query time")
    if delta <= 0:
        raise ValueError("delta must be > 0")
    return float(np.exp(-delta * dt))


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def attention(params: ModelParams, u: int, history) -> np.ndarray:
    """Softmax weights over history events from the shared graph-attention score.

    Scores are LeakyReLU(a . [W I_u ; W I_h]). With attention disabled
    (ablation) every event gets weight 1 instead.
    """
    n_ev = len(history)
    if n_ev == 0:
        return np.zeros(0)
    if not params.hyper.use_attention:
        return np.ones(n_ev)
    w_u = params.attn_w @ params.identity[u]
    a1, a2 = params.attn_a[: params.hyper.dim], params.attn_a[params.hyper.dim :]
    z = np.array(
        [a1 @ w_u + a2 @ (params.attn_w @ params.identity[h]) for h, _ in history]
    )
    e = np.where(z >= 0, z, LEAKY_SLOPE * z)
    return _softmax(e)


def context(params: ModelParams, u: int, t: float, history, k: int) -> np.ndarray:
    """Aspect-k context for u at time t: decayed mean of history aspect
    embeddings averaged with u's own. Empty history degenerates to u's own
    aspect embedding (the base rate must still drive a node's first edge)."""
    return all_contexts(params, u, t, history)[k]


def all_contexts(params: ModelParams, u: int, t: float, history) -> np.ndarray:
    """All K context vectors at once, shape (K, m)."""
    a_u = params.aspect[u]
    if len(history) == 0:
        return a_u.copy()
    delta_u = float(params.decay[u])
    ids = np.array([h for h, _ in history], dtype=np.int64)
    dts = t - np.array([th for _, th in history])
    kappa = np.exp(-delta_u * dts)
    excite = np.tensordot(kappa, params.aspect[ids], axes=(0, 0)) / len(history)
    return 0.5 * (excite + a_u)


def gumbel_noise(rng: np.random.Generator, k: int) -> np.ndarray:
    """k i.i.d. standard Gumbel draws: -log(-log(uniform))."""
    return -np.log(-np.log(rng.random(k)))


def aspect_distribution(
    params: ModelParams,
    n: int,
    contexts: np.ndarray,
    rng: Optional[np.random.Generator] = None,
    stochastic: bool = False,
    noise: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Simplex of aspect weights for node n against the source's contexts.

    softmax over k of (similarity(I_n, C_k) + g_k) / tau_n, with g either
    fresh Gumbel noise (stochastic training), a replayed draw (``noise``), or
    zero (deterministic inference). The Gumbel ablation freezes tau at 1 and
    forces g = 0.
    """
    k = contexts.shape[0]
    f = -np.sum((params.identity[n] - contexts) ** 2, axis=1)
    if params.hyper.use_gumbel:
        if noise is not None:
            g = noise
        elif stochastic:
            if rng is None:
                raise ValueError("stochastic aspect distribution needs an RNG")
            g = gumbel_noise(rng, k)
        else:
            g = 0.0
        logits = (f + g) / float(params.temperature[n])
    else:
        logits = f
    return _softmax(logits)


@dataclass
class EdgeContext:
    """Everything shared by intensity evaluations of one (source, time) query.

    Attention weights, contexts, and aspect distributions depend only on the
    source and its history, so one EdgeContext serves a positive target and
    all its sampled negatives (swap ``target`` via ``with_target``).
    """

    source: int
    target: int
    time: float
    history: list
    attn: np.ndarray
    contexts: np.ndarray          # (K, m)
    pis: dict                     # node id -> (K,) aspect weights
    gumbel: Optional[dict] = None  # node id -> (K,) noise used, when stochastic

    def with_target(self, v: int) -> "EdgeContext":
        return replace(self, target=v)


def build_context(
    params: ModelParams,
    u: int,
    v: int,
    t: float,
    history,
    rng: Optional[np.random.Generator] = None,
    stochastic: bool = False,
    noise: Optional[dict] = None,
) -> EdgeContext:
    """Assemble the shared quantities for scoring targets of u at time t.

    ``noise`` replays previously drawn per-node Gumbel vectors; otherwise
    fresh draws are taken (stochastic) or zeros used (deterministic). Aspect
    distributions are computed for u and each distinct history node, all
    against u's contexts.
    """
    ctxs = all_contexts(params, u, t, history)
    attn = attention(params, u, history)
    nodes = [u]
    for h, _ in history:
        if h not in nodes:
            nodes.append(h)
    draw = stochastic and params.hyper.use_gumbel and noise is None
    used = dict(noise) if noise is not None else ({} if draw else None)
    pis = {}
    for n in nodes:
        g = None
        if noise is not None:
            g = noise.get(n)
        elif draw:
            g = gumbel_noise(rng, params.hyper.n_aspects)
            used[n] = g
        pis[n] = aspect_distribution(params, n, ctxs, noise=g)
    return EdgeContext(u, v, t, list(history), attn, ctxs, pis, used)


def aspect_intensity(params: ModelParams, ctx: EdgeContext, k: int) -> float:
    """Raw (unexponentiated) aspect-k rate of the context's source-target pair."""
    u, v, t = ctx.source, ctx.target, ctx.time
    mu = similarity(params.identity[u], params.identity[v])
    gamma_u = -similarity(params.aspect[u, k], params.aspect[v, k])
    total = mu * gamma_u
    delta_u = float(params.decay[u])
    for j, (h, th) in enumerate(ctx.history):
        alpha = float(ctx.attn[j]) * similarity(params.identity[h], params.identity[v])
        gamma_h = -similarity(params.aspect[h, k], params.aspect[v, k])
        total += float(ctx.pis[h][k]) * alpha * gamma_h * kernel(delta_u, t - th)
    return float(total)


def mixed_intensity(params: ModelParams, ctx: EdgeContext) -> float:
    """Aspect mixture of raw rates; apply exp() for a positive rate per unit time."""
    pi_u = ctx.pis[ctx.source]
    return float(
        sum(pi_u[k] * aspect_intensity(params, ctx, k) for k in range(len(pi_u)))
    )


def candidate_scores(params: ModelParams, ctx: EdgeContext, targets) -> np.ndarray:
    """Vectorized ``mixed_intensity`` over many candidate targets."""
    targets = np.asarray(targets, dtype=np.int64)
    u, t = ctx.source, ctx.time
    i_t = params.identity[targets]                      # (C, m)
    a_t = params.aspect[targets]                        # (C, K, m)
    mu = -np.sum((params.identity[u] - i_t) ** 2, axis=1)
    gamma_u = np.sum((params.aspect[u][None] - a_t) ** 2, axis=2)   # (C, K)
    lam_k = mu[:, None] * gamma_u
    if ctx.history:
        delta_u = float(params.decay[u])
        ids = np.array([h for h, _ in ctx.history], dtype=np.int64)
        dts = t - np.array([th for _, th in ctx.history])
        kappa = np.exp(-delta_u * dts)
        f_ht = -np.sum(
            (params.identity[ids][:, None, :] - i_t[None]) ** 2, axis=2
        )                                               # (L, C)
        alpha = ctx.attn[:, None] * f_ht
        gamma_h = np.sum(
            (params.aspect[ids][:, None, :, :] - a_t[None]) ** 2, axis=3
        )                                               # (L, C, K)
        pis_h = np.stack([ctx.pis[h] for h, _ in ctx.history])      # (L, K)
        lam_k = lam_k + np.einsum(
            "lk,lc,lck,l->ck", pis_h, alpha, gamma_h, kappa
        )
    return lam_k @ ctx.pis[u]
