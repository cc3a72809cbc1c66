"""Negative-sampling objective, exact analytic gradients, and the trainer.

The loss for one temporal edge (u, v, t) scores the raw mixed intensity of
the true target against degree-weighted negative samples through a sigmoid:
-log sig(lam_pos) - sum_i log sig(-lam_neg_i). Gradients are derived by hand
and flow through the aspect softmax (with Gumbel noise held fixed), the
attention softmax, contexts, kernels, and the softplus reparameterizations of
the per-node decay and temperature.

``sample_loss`` evaluates the objective through the scalar intensity ops;
``gradients`` and the trainer share a vectorized batch engine. The two routes
are tested against each other, and the engine against finite differences.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.special import expit

from .intensity import LEAKY_SLOPE, build_context, gumbel_noise, mixed_intensity
from .params import HyperParams, ModelParams, init_params, save_params, softplus
from .temporal_graph import NeighborEvent, NegativeSampler, TemporalEdge, sample_negatives

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
CLIP_NORM = 5.0


class TrainingDiverged(RuntimeError):
    """Mean epoch loss became non-finite; parameters blew up."""


@dataclass
class LossSample:
    """One training example: an observed edge, its history window, sampled
    negatives, and the per-node Gumbel draws used (kept for gradient replay)."""

    edge: TemporalEdge
    history: list
    negatives: np.ndarray
    gumbel: Optional[dict] = None


@dataclass
class GradientSet:
    """Per-sample gradients, sparse over nodes: absent node means zero."""

    d_identity: dict
    d_aspect: dict
    d_rho: dict
    d_theta: dict
    d_attn_w: np.ndarray
    d_attn_a: np.ndarray

    def touched(self):
        return set(self.d_identity)


def make_sample(net, sampler, edge: TemporalEdge, hyper: HyperParams, rng) -> LossSample:
    """Assemble the loss sample for one edge: recent history, negatives, noise."""
    u, v, t = edge
    nbrs, times = net.recent(u, t, hyper.history_len)
    hist = [NeighborEvent(int(n), float(tt)) for n, tt in zip(nbrs, times)]
    negs = sample_negatives(sampler, net, u, v, hyper.n_negatives, rng)
    noise = None
    if hyper.use_gumbel:
        noise = {}
        for n in [u] + [h for h, _ in hist]:
            if n not in noise:
                noise[n] = gumbel_noise(rng, hyper.n_aspects)
    return LossSample(edge, hist, negs, noise)


def sample_loss(params: ModelParams, sample: LossSample) -> float:
    """Objective value for one sample, replaying its stored Gumbel draws."""
    u, v, t = sample.edge
    ctx = build_context(params, u, v, t, sample.history, noise=sample.gumbel)
    lam_pos = mixed_intensity(params, ctx)
    lam_negs = [mixed_intensity(params, ctx.with_target(int(w))) for w in sample.negatives]
    lams = np.array([lam_pos] + lam_negs)
    if not np.all(np.isfinite(lams)):
        raise ValueError("non-finite intensity in loss: parameters have blown up")
    return float(np.logaddexp(0.0, -lam_pos) + np.logaddexp(0.0, np.array(lam_negs)).sum())


def gradients(params: ModelParams, sample: LossSample) -> GradientSet:
    """Exact gradient of ``sample_loss`` for every touched parameter."""
    batch = _assemble(params.hyper, [sample])
    _, compact = _engine(params, batch, want_grads=True)
    return _compact_to_set(compact)


def batch_loss(params: ModelParams, samples) -> np.ndarray:
    """Per-sample losses through the vectorized engine."""
    losses, _ = _engine(params, _assemble(params.hyper, samples), want_grads=False)
    return losses


def batch_gradients(params: ModelParams, samples):
    """(mean loss, mean GradientSet) over a list of samples."""
    losses, compact = _engine(params, _assemble(params.hyper, samples), want_grads=True)
    compact.scale(1.0 / len(samples))
    return float(losses.mean()), _compact_to_set(compact)


def ablation_config(base: HyperParams, variant: str) -> HyperParams:
    """Toggle the attention / Gumbel components off for submodel studies."""
    if variant == "full":
        return base
    if variant == "no_attn":
        return replace(base, use_attention=False)
    if variant == "no_gumbel":
        return replace(base, use_gumbel=False)
    if variant == "no_attn_no_gumbel":
        return replace(base, use_attention=False, use_gumbel=False)
    raise ValueError(
        f"unknown ablation variant {variant!r}; "
        "expected full, no_attn, no_gumbel, or no_attn_no_gumbel"
    )


# ---------------------------------------------------------------------------
# Batched engine. Samples are padded to the longest history in the batch;
# padded slots carry kappa == 0, which zeroes their forward contribution and
# every gradient path that reaches node arrays.


@dataclass
class _Batch:
    u: np.ndarray          # (B,)
    cand: np.ndarray       # (B, C) column 0 is the positive target
    t: np.ndarray          # (B,)
    hist_ids: np.ndarray   # (B, L) padded with 0
    hist_dt: np.ndarray    # (B, L) query time minus event time
    hist_mask: np.ndarray  # (B, L) 1.0 for real events
    g_u: np.ndarray        # (B, K) Gumbel noise for the source
    g_h: np.ndarray        # (B, L, K) noise per history event (node-shared)


def _assemble(hyper: HyperParams, samples) -> _Batch:
    b = len(samples)
    k = hyper.n_aspects
    n_neg = hyper.n_negatives
    lmax = max((len(s.history) for s in samples), default=0)
    u = np.empty(b, dtype=np.int64)
    t = np.empty(b)
    cand = np.empty((b, 1 + n_neg), dtype=np.int64)
    hist_ids = np.zeros((b, lmax), dtype=np.int64)
    hist_dt = np.zeros((b, lmax))
    hist_mask = np.zeros((b, lmax))
    g_u = np.zeros((b, k))
    g_h = np.zeros((b, lmax, k))
    for i, s in enumerate(samples):
        u[i], v, t[i] = s.edge.source, s.edge.target, s.edge.time
        cand[i, 0] = v
        cand[i, 1:] = s.negatives
        for j, (h, th) in enumerate(s.history):
            hist_ids[i, j] = h
            hist_dt[i, j] = t[i] - th
            hist_mask[i, j] = 1.0
            if s.gumbel is not None:
                g_h[i, j] = s.gumbel[h]
        if s.gumbel is not None:
            g_u[i] = s.gumbel[s.edge.source]
    return _Batch(u, cand, t, hist_ids, hist_dt, hist_mask, g_u, g_h)


@dataclass
class _CompactGrads:
    """Summed batch gradients over the unique touched nodes."""

    nodes: np.ndarray
    d_identity: np.ndarray  # (U, m)
    d_aspect: np.ndarray    # (U, K, m)
    d_rho: np.ndarray       # (U,)
    d_theta: np.ndarray     # (U,)
    d_attn_w: np.ndarray    # (m, m)
    d_attn_a: np.ndarray    # (2m,)

    def scale(self, c: float) -> None:
        self.d_identity *= c
        self.d_aspect *= c
        self.d_rho *= c
        self.d_theta *= c
        self.d_attn_w *= c
        self.d_attn_a *= c

    def global_norm(self) -> float:
        sq = (
            np.sum(self.d_identity**2)
            + np.sum(self.d_aspect**2)
            + np.sum(self.d_rho**2)
            + np.sum(self.d_theta**2)
            + np.sum(self.d_attn_w**2)
            + np.sum(self.d_attn_a**2)
        )
        return float(np.sqrt(sq))


def _compact_to_set(c: _CompactGrads) -> GradientSet:
    gs = GradientSet({}, {}, {}, {}, c.d_attn_w, c.d_attn_a)
    for i, node in enumerate(c.nodes):
        node = int(node)
        gs.d_identity[node] = c.d_identity[i]
        gs.d_aspect[node] = c.d_aspect[i]
        gs.d_rho[node] = float(c.d_rho[i])
        gs.d_theta[node] = float(c.d_theta[i])
    return gs


def _engine(params: ModelParams, batch: _Batch, want_grads: bool):
    """Forward (and optionally backward) pass over a padded batch.

    Returns (per-sample losses, _CompactGrads or None). Gradients are sums
    over the batch; the trainer rescales to a mean.
    """
    hyper = params.hyper
    m, k = hyper.dim, hyper.n_aspects
    ident, aspect = params.identity, params.aspect
    u, cand, hist = batch.u, batch.cand, batch.hist_ids
    b, c = cand.shape
    lmax = hist.shape[1]
    mask = batch.hist_mask
    lens = mask.sum(axis=1)
    lens_safe = np.maximum(lens, 1.0)

    iu = ident[u]                        # (B, m)
    ic = ident[cand]                     # (B, C, m)
    ih = ident[hist]                     # (B, L, m)
    au = aspect[u]                       # (B, K, m)
    ac = aspect[cand]                    # (B, C, K, m)
    ah = aspect[hist]                    # (B, L, K, m)

    rho_u = params.rho[u]
    delta_u = softplus(rho_u)
    kappa = np.exp(-delta_u[:, None] * batch.hist_dt) * mask    # (B, L)

    # attention over history events
    if hyper.use_attention and lmax > 0:
        a1, a2 = params.attn_a[:m], params.attn_a[m:]
        wu = iu @ params.attn_w.T                                # (B, m)
        wh = ih @ params.attn_w.T                                # (B, L, m)
        z = (wu @ a1)[:, None] + wh @ a2                         # (B, L)
        e = np.where(z >= 0, z, LEAKY_SLOPE * z)
        row_max = np.max(np.where(mask > 0, e, -np.inf), axis=1, keepdims=True)
        row_max = np.where(np.isfinite(row_max), row_max, 0.0)   # rows w/o history
        exp_e = np.exp(np.where(mask > 0, e - row_max, -np.inf))
        denom = exp_e.sum(axis=1, keepdims=True)
        attn = np.divide(exp_e, denom, out=np.zeros_like(exp_e), where=denom > 0)
    else:
        attn = mask.copy()
        z = wu = wh = None

    # contexts: decayed history mean blended with the source's own aspects
    hsum = np.einsum("bl,blkm->bkm", kappa, ah) if lmax else np.zeros((b, k, m))
    havg = hsum / lens_safe[:, None, None]
    w_ex = np.where(lens > 0, 0.5, 0.0)
    w_self = np.where(lens > 0, 0.5, 1.0)
    ctx = w_ex[:, None, None] * havg + w_self[:, None, None] * au    # (B, K, m)

    # aspect distributions for the source (row 0) and each history event
    nodes_n = np.concatenate([u[:, None], hist], axis=1)             # (B, L+1)
    i_n = ident[nodes_n]                                             # (B, L+1, m)
    diff_nc = i_n[:, :, None, :] - ctx[:, None, :, :]                # (B, L+1, K, m)
    f_n = -np.sum(diff_nc**2, axis=3)                                # (B, L+1, K)
    g_n = np.concatenate([batch.g_u[:, None, :], batch.g_h], axis=1)
    if hyper.use_gumbel:
        theta_n = params.theta[nodes_n]
        tau_n = softplus(theta_n)
        logits = (f_n + g_n) / tau_n[:, :, None]
    else:
        tau_n = None
        logits = f_n
    logits = logits - logits.max(axis=2, keepdims=True)
    exp_l = np.exp(logits)
    pi = exp_l / exp_l.sum(axis=2, keepdims=True)                    # (B, L+1, K)
    pi_u, pi_h = pi[:, 0, :], pi[:, 1:, :]

    # per-aspect and mixed intensities for every candidate
    mu = -np.sum((iu[:, None, :] - ic) ** 2, axis=2)                 # (B, C)
    gam_u = np.sum((au[:, None] - ac) ** 2, axis=3)                  # (B, C, K)
    lam_k = mu[:, :, None] * gam_u                                   # (B, C, K)
    if lmax:
        f_hc = -np.sum((ih[:, :, None, :] - ic[:, None]) ** 2, axis=3)      # (B, L, C)
        gam_h = np.sum((ah[:, :, None] - ac[:, None]) ** 2, axis=4)         # (B, L, C, K)
        ak = attn * kappa                                                   # (B, L)
        s_lc = f_hc * ak[:, :, None]
        lam_k = lam_k + np.einsum("blk,blck,blc->bck", pi_h, gam_h, s_lc)
    lam = np.einsum("bck,bk->bc", lam_k, pi_u)                       # (B, C)

    if not np.all(np.isfinite(lam)):
        raise ValueError("non-finite intensity in batch: parameters have blown up")
    losses = np.logaddexp(0.0, -lam[:, 0]) + np.logaddexp(0.0, lam[:, 1:]).sum(axis=1)
    if not want_grads:
        return losses, None

    # ----- backward -----
    wc = expit(lam)
    wc[:, 0] -= 1.0                                                  # dL/dlam

    dpi_u = np.einsum("bc,bck->bk", wc, lam_k)
    dlam_k = wc[:, :, None] * pi_u[:, None, :]                       # (B, C, K)
    dmu = np.einsum("bck,bck->bc", dlam_k, gam_u)
    dgam_u = dlam_k * mu[:, :, None]

    dkappa = np.zeros((b, lmax))
    if lmax:
        cg = np.einsum("bck,blck->blck", dlam_k, gam_h)              # (B, L, C, K)
        dpi_h = np.einsum("blck,blc->blk", cg, s_lc)
        e0 = np.einsum("blck,blk,blc->bl", cg, pi_h, f_hc)
        dattn = e0 * kappa
        dkappa += e0 * attn
        df_hc = np.einsum("blck,blk->blc", cg, pi_h) * ak[:, :, None]
        dgam_h = (dlam_k[:, None] * pi_h[:, :, None, :]) * s_lc[:, :, :, None]
    else:
        dpi_h = np.zeros((b, 0, k))
        dattn = None

    # aspect-softmax backward (linear in dpi, so per-event rows of duplicated
    # nodes sum to the correct node gradient on scatter)
    dpi = np.concatenate([dpi_u[:, None, :], dpi_h], axis=1)         # (B, L+1, K)
    dlogits = pi * (dpi - np.sum(dpi * pi, axis=2, keepdims=True))
    if hyper.use_gumbel:
        df_n = dlogits / tau_n[:, :, None]
        dtau_n = -np.sum(dlogits * (f_n + g_n), axis=2) / tau_n**2
        dtheta_n = dtau_n * expit(theta_n)
    else:
        df_n = dlogits
        dtheta_n = np.zeros((b, lmax + 1))
    di_n = -2.0 * np.einsum("bnk,bnkm->bnm", df_n, diff_nc)
    dctx = 2.0 * np.einsum("bnk,bnkm->bkm", df_n, diff_nc)

    # context backward
    dau = w_self[:, None, None] * dctx
    dhsum = (w_ex / lens_safe)[:, None, None] * dctx
    if lmax:
        dkappa += np.einsum("bkm,blkm->bl", dhsum, ah)
        dah = dhsum[:, None] * kappa[:, :, None, None]
    else:
        dah = np.zeros((b, 0, k, m))

    # kernel / decay backward
    ddelta = -np.sum(dkappa * batch.hist_dt * kappa, axis=1)
    drho_u = ddelta * expit(rho_u)

    # attention backward
    d_attn_w = np.zeros((m, m))
    d_attn_a = np.zeros(2 * m)
    diu = np.zeros((b, m))
    dih = np.zeros((b, lmax, m))
    if hyper.use_attention and lmax > 0:
        a1, a2 = params.attn_a[:m], params.attn_a[m:]
        de = attn * (dattn - np.sum(dattn * attn, axis=1, keepdims=True))
        dz = de * np.where(z >= 0, 1.0, LEAKY_SLOPE)
        dz_row = dz.sum(axis=1)
        d_attn_a[:m] = dz_row @ wu
        d_attn_a[m:] = np.einsum("bl,blm->m", dz, wh)
        d_attn_w = np.outer(a1, dz_row @ iu) + np.outer(a2, np.einsum("bl,blm->m", dz, ih))
        diu += dz_row[:, None] * (params.attn_w.T @ a1)
        dih += dz[:, :, None] * (params.attn_w.T @ a2)

    # similarity-term backward
    diff_uc = iu[:, None, :] - ic
    diu += -2.0 * np.einsum("bc,bcm->bm", dmu, diff_uc)
    dic = 2.0 * dmu[:, :, None] * diff_uc
    diff_au = au[:, None] - ac
    dau += 2.0 * np.einsum("bck,bckm->bkm", dgam_u, diff_au)
    dac = -2.0 * dgam_u[:, :, :, None] * diff_au
    if lmax:
        diff_hc = ih[:, :, None, :] - ic[:, None]
        dih += -2.0 * np.einsum("blc,blcm->blm", df_hc, diff_hc)
        dic += 2.0 * np.einsum("blc,blcm->bcm", df_hc, diff_hc)
        diff_ahc = ah[:, :, None] - ac[:, None]
        dah += 2.0 * np.einsum("blck,blckm->blkm", dgam_h, diff_ahc)
        dac += -2.0 * np.einsum("blck,blckm->bckm", dgam_h, diff_ahc)

    # fold the pi-path identity gradients into their roles
    diu += di_n[:, 0, :]
    dih += di_n[:, 1:, :]

    # scatter per-role contributions onto unique touched nodes; padded history
    # slots are excluded so they neither appear as touched nor receive zeros
    valid = mask.reshape(-1) > 0
    hist_flat = hist.reshape(-1)[valid]
    ids_all = np.concatenate([u, cand.reshape(-1), hist_flat])
    nodes, inv = np.unique(ids_all, return_inverse=True)
    inv_u = inv[:b]
    inv_c = inv[b : b + b * c]
    inv_h = inv[b + b * c :]

    n_u = len(nodes)
    d_identity = np.zeros((n_u, m))
    np.add.at(d_identity, inv_u, diu)
    np.add.at(d_identity, inv_c, dic.reshape(-1, m))
    d_aspect = np.zeros((n_u, k, m))
    np.add.at(d_aspect, inv_u, dau)
    np.add.at(d_aspect, inv_c, dac.reshape(-1, k, m))
    d_rho = np.zeros(n_u)
    np.add.at(d_rho, inv_u, drho_u)
    d_theta = np.zeros(n_u)
    np.add.at(d_theta, inv_u, dtheta_n[:, 0])
    if lmax:
        np.add.at(d_identity, inv_h, dih.reshape(-1, m)[valid])
        np.add.at(d_aspect, inv_h, dah.reshape(-1, k, m)[valid])
        np.add.at(d_theta, inv_h, dtheta_n[:, 1:].reshape(-1)[valid])

    compact = _CompactGrads(nodes, d_identity, d_aspect, d_rho, d_theta, d_attn_w, d_attn_a)
    return losses, compact


class _LazyAdam:
    """Adam whose moment estimates advance only for rows present in a batch.

    Bias correction uses the global step count, matching the usual lazy/sparse
    Adam variants for embedding tables.
    """

    def __init__(self, params: ModelParams, lr: float):
        self.lr = lr
        self.step_count = 0
        self.m = {
            "identity": np.zeros_like(params.identity),
            "aspect": np.zeros_like(params.aspect),
            "rho": np.zeros_like(params.rho),
            "theta": np.zeros_like(params.theta),
            "attn_w": np.zeros_like(params.attn_w),
            "attn_a": np.zeros_like(params.attn_a),
        }
        self.v = {name: np.zeros_like(arr) for name, arr in self.m.items()}

    def _update(self, name, target, grad, rows=None):
        m, v = self.m[name], self.v[name]
        bc1 = 1.0 - ADAM_BETA1**self.step_count
        bc2 = 1.0 - ADAM_BETA2**self.step_count
        if rows is None:
            m += (1.0 - ADAM_BETA1) * (grad - m)
            v += (1.0 - ADAM_BETA2) * (grad**2 - v)
            target -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
        else:
            m[rows] += (1.0 - ADAM_BETA1) * (grad - m[rows])
            v[rows] += (1.0 - ADAM_BETA2) * (grad**2 - v[rows])
            target[rows] -= self.lr * (m[rows] / bc1) / (np.sqrt(v[rows] / bc2) + ADAM_EPS)

    def step(self, params: ModelParams, grads: _CompactGrads, update_attention: bool):
        self.step_count += 1
        rows = grads.nodes
        self._update("identity", params.identity, grads.d_identity, rows)
        self._update("aspect", params.aspect, grads.d_aspect, rows)
        self._update("rho", params.rho, grads.d_rho, rows)
        self._update("theta", params.theta, grads.d_theta, rows)
        if update_attention:
            self._update("attn_w", params.attn_w, grads.d_attn_w)
            self._update("attn_a", params.attn_a, grads.d_attn_a)


def train(
    net,
    hyper: HyperParams,
    rng: Optional[np.random.Generator] = None,
    on_epoch=None,
    checkpoint_every: Optional[int] = None,
    checkpoint_dir=None,
) -> ModelParams:
    """Mini-batch Adam over shuffled temporal edges.

    Negatives and Gumbel draws for each sample come from a private stream
    keyed by (seed, epoch, edge index), so they do not depend on the batch
    schedule. With the default rng the run is a pure function of
    (net, hyper, seed). ``on_epoch(epoch, mean_loss, wall_seconds)`` is
    called after every pass.
    """
    if net.n_edges == 0:
        raise ValueError("cannot train on an empty network")
    params = init_params(hyper, net.node_count, np.random.default_rng(hyper.seed))
    if hyper.epochs == 0:
        return params
    master = rng if rng is not None else np.random.default_rng(hyper.seed)
    sampler = NegativeSampler(net, seed=hyper.seed)
    adam = _LazyAdam(params, hyper.lr)
    n_edges = net.n_edges
    update_attention = hyper.use_attention

    for epoch in range(hyper.epochs):
        t0 = time.perf_counter()
        order = master.permutation(n_edges)
        loss_sum = 0.0
        for start in range(0, n_edges, hyper.batch_size):
            idxs = order[start : start + hyper.batch_size]
            samples = []
            for i in idxs:
                i = int(i)
                edge = TemporalEdge(int(net.sources[i]), int(net.targets[i]), float(net.times[i]))
                srng = np.random.default_rng([hyper.seed, epoch, i])
                samples.append(make_sample(net, sampler, edge, hyper, srng))
            batch = _assemble(hyper, samples)
            losses, compact = _engine(params, batch, want_grads=True)
            loss_sum += float(losses.sum())
            compact.scale(1.0 / len(samples))
            norm = compact.global_norm()
            if norm > CLIP_NORM:
                compact.scale(CLIP_NORM / norm)
            adam.step(params, compact, update_attention)
        mean_loss = loss_sum / n_edges
        wall = time.perf_counter() - t0
        if not np.isfinite(mean_loss):
            raise TrainingDiverged(
                f"epoch {epoch}: mean loss is {mean_loss}; try a lower learning rate"
            )
        if on_epoch is not None:
            on_epoch(epoch, mean_loss, wall)
        if (
            checkpoint_every
            and checkpoint_dir is not None
            and (epoch + 1) % checkpoint_every == 0
        ):
            save_params(params, f"{checkpoint_dir}/checkpoint_epoch{epoch + 1:04d}.bin")
    return params
