import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hawkmix import (
    NeighborEvent,
    aspect_distribution,
    aspect_intensity,
    attention,
    build_context,
    candidate_scores,
    context,
    kernel,
    mixed_intensity,
    similarity,
)
from hawkmix.intensity import all_contexts
from hawkmix.params import softplus_inv

from oracle import ref_all, softmax as ref_softmax
from util import random_params


def test_similarity_values():
    assert similarity([0, 0], [3, 4]) == -25.0
    assert similarity([1.0, -2.0, 0.5], [1.0, -2.0, 0.5]) == 0.0
    assert similarity([1], [-1]) == -4.0


def test_similarity_shape_mismatch():
    with pytest.raises(ValueError):
        similarity([1, 2], [1, 2, 3])


def test_kernel_values():
    assert kernel(1.0, 0.0) == 1.0
    assert kernel(1.0, math.log(2)) == pytest.approx(0.5, abs=1e-15)
    assert kernel(2.0, 0.5) == pytest.approx(math.exp(-1), abs=1e-15)


def test_kernel_rejects_negative_dt():
    with pytest.raises(ValueError):
        kernel(1.0, -0.1)


@given(
    delta=st.floats(0.01, 10),
    dt1=st.floats(0, 5),
    dt2=st.floats(0, 5),
)
@settings(max_examples=50, deadline=None)
def test_kernel_monotone_decreasing(delta, dt1, dt2):
    lo, hi = sorted([dt1, dt2])
    assert kernel(delta, hi) <= kernel(delta, lo)
    assert 0 < kernel(delta, hi) <= 1


def hist(*pairs):
    return [NeighborEvent(h, t) for h, t in pairs]


def test_attention_singleton():
    p = random_params(np.random.default_rng(0))
    w = attention(p, 0, hist((2, 0.1)))
    assert w.tolist() == [1.0]


def test_attention_identical_history_uniform():
    p = random_params(np.random.default_rng(1))
    p.identity[3] = p.identity[4] = p.identity[5]
    w = attention(p, 0, hist((3, 0.1), (4, 0.2), (5, 0.3)))
    assert np.allclose(w, 1 / 3, atol=1e-12)


def test_attention_matches_reference():
    rng = np.random.default_rng(2)
    for _ in range(10):
        p = random_params(rng)
        h = hist((2, 0.1), (5, 0.4), (7, 0.6))
        got = attention(p, 0, h)
        ref, _, _, _, _ = ref_all(p, 0, 1, 0.9, h, None)
        assert np.allclose(got, ref, atol=1e-12)
        assert got.sum() == pytest.approx(1.0, abs=1e-9)


def test_attention_disabled_gives_ones():
    p = random_params(np.random.default_rng(3), use_attention=False)
    w = attention(p, 0, hist((2, 0.1), (3, 0.2)))
    assert w.tolist() == [1.0, 1.0]


def test_context_empty_history_is_own_embedding():
    p = random_params(np.random.default_rng(4))
    for k in range(p.hyper.n_aspects):
        assert np.array_equal(context(p, 0, 0.5, [], k), p.aspect[0, k])


def test_context_zero_dt_averages():
    p = random_params(np.random.default_rng(5))
    got = context(p, 0, 0.5, hist((2, 0.5)), 1)
    assert np.allclose(got, 0.5 * (p.aspect[2, 1] + p.aspect[0, 1]), atol=1e-15)


def test_context_matches_reference():
    rng = np.random.default_rng(6)
    for _ in range(10):
        p = random_params(rng)
        h = hist((2, 0.05), (4, 0.3), (8, 0.7))
        _, ref_ctx, _, _, _ = ref_all(p, 0, 1, 0.9, h, None)
        for k in range(p.hyper.n_aspects):
            assert np.allclose(context(p, 0, 0.9, h, k), ref_ctx[k], atol=1e-12)


def test_aspect_distribution_uniform_when_similarities_equal():
    p = random_params(np.random.default_rng(7), k=3)
    ctxs = np.tile(p.identity[0], (3, 1))  # same distance (zero) to every context
    pi = aspect_distribution(p, 0, ctxs)
    assert np.allclose(pi, 1 / 3, atol=1e-12)


def test_aspect_distribution_low_temperature_one_hot():
    p = random_params(np.random.default_rng(8), k=3)
    p.theta[0] = softplus_inv(1e-3)
    ctxs = np.stack([
        p.identity[0],                          # distance 0
        p.identity[0] + 0.4,                    # clearly farther
        p.identity[0] - 0.5,
    ])
    pi = aspect_distribution(p, 0, ctxs)
    assert np.argmax(pi) == 0
    assert pi[0] > 0.99


def test_aspect_distribution_sums_to_one_and_positive():
    rng = np.random.default_rng(9)
    for _ in range(20):
        p = random_params(rng)
        ctxs = rng.normal(0, 1, (p.hyper.n_aspects, p.hyper.dim))
        pi = aspect_distribution(p, 0, ctxs)
        assert pi.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(pi > 0)


def test_aspect_distribution_gumbel_argmax_frequencies():
    """Monte Carlo: argmax of the noisy distribution follows softmax(F)."""
    rng = np.random.default_rng(10)
    p = random_params(rng, k=4, m=3)
    p.theta[0] = softplus_inv(1.0)
    offsets = np.array([0.0, 0.5, 0.8, 1.2])
    ctxs = p.identity[0][None, :] + offsets[:, None] / np.sqrt(3)
    f = [-np.sum((p.identity[0] - c) ** 2) for c in ctxs]
    expected = np.asarray(ref_softmax(f))
    draws = 100_000
    counts = np.zeros(4)
    for _ in range(draws):
        pi = aspect_distribution(p, 0, ctxs, rng=rng, stochastic=True)
        counts[np.argmax(pi)] += 1
    assert np.abs(counts / draws - expected).sum() <= 0.02


def test_aspect_distribution_deterministic_vs_replayed_noise():
    rng = np.random.default_rng(11)
    p = random_params(rng)
    ctxs = rng.normal(0, 1, (p.hyper.n_aspects, p.hyper.dim))
    noise = np.array([0.3, -0.2, 1.0])
    a = aspect_distribution(p, 0, ctxs, noise=noise)
    b = aspect_distribution(p, 0, ctxs, noise=noise)
    assert np.array_equal(a, b)


def test_aspect_distribution_no_gumbel_ignores_temperature():
    rng = np.random.default_rng(12)
    p = random_params(rng, use_gumbel=False)
    p.theta[0] = softplus_inv(1e-3)  # would sharpen if it were used
    ctxs = rng.normal(0, 0.1, (p.hyper.n_aspects, p.hyper.dim))
    pi = aspect_distribution(p, 0, ctxs)
    f = np.array([-np.sum((p.identity[0] - c) ** 2) for c in ctxs])
    assert np.allclose(pi, np.asarray(ref_softmax(f.tolist())), atol=1e-12)


def test_aspect_intensity_empty_history_is_base_term():
    p = random_params(np.random.default_rng(13))
    ctx = build_context(p, 0, 1, 0.9, [])
    for k in range(p.hyper.n_aspects):
        mu = similarity(p.identity[0], p.identity[1])
        gam = -similarity(p.aspect[0, k], p.aspect[1, k])
        assert aspect_intensity(p, ctx, k) == pytest.approx(mu * gam, abs=1e-12)


def test_aspect_intensity_zero_aspects_zero():
    p = random_params(np.random.default_rng(14))
    p.aspect[:] = 0.0
    ctx = build_context(p, 0, 1, 0.9, hist((2, 0.2), (3, 0.5)))
    for k in range(p.hyper.n_aspects):
        assert aspect_intensity(p, ctx, k) == 0.0


def test_aspect_intensity_matches_reference():
    rng = np.random.default_rng(15)
    for _ in range(10):
        p = random_params(rng)
        h = hist((2, 0.1), (6, 0.55))
        ctx = build_context(p, 0, 1, 0.9, h)
        _, _, _, ref_lam_k, _ = ref_all(p, 0, 1, 0.9, h, None)
        for k in range(p.hyper.n_aspects):
            assert aspect_intensity(p, ctx, k) == pytest.approx(ref_lam_k[k], abs=1e-12)


def test_mixed_intensity_k1_degenerate():
    p = random_params(np.random.default_rng(16), k=1)
    h = hist((2, 0.3))
    ctx = build_context(p, 0, 1, 0.9, h)
    assert ctx.pis[0].tolist() == [1.0]
    assert mixed_intensity(p, ctx) == pytest.approx(aspect_intensity(p, ctx, 0), abs=1e-15)


def test_mixed_intensity_convexity_under_equal_components():
    p = random_params(np.random.default_rng(17))
    p.aspect[:] = p.aspect[0, 0]  # every aspect identical -> equal lambdas
    ctx = build_context(p, 0, 1, 0.9, hist((2, 0.3), (4, 0.6)))
    lams = [aspect_intensity(p, ctx, k) for k in range(p.hyper.n_aspects)]
    assert np.allclose(lams, lams[0], atol=1e-12)
    assert mixed_intensity(p, ctx) == pytest.approx(lams[0], abs=1e-9)


def test_mixed_intensity_between_min_and_max_aspect():
    rng = np.random.default_rng(18)
    for _ in range(20):
        p = random_params(rng)
        h = hist((2, 0.1), (3, 0.4), (7, 0.8))
        ctx = build_context(p, 0, 1, 0.9, h)
        lams = [aspect_intensity(p, ctx, k) for k in range(p.hyper.n_aspects)]
        lam = mixed_intensity(p, ctx)
        assert min(lams) - 1e-12 <= lam <= max(lams) + 1e-12
        assert np.exp(lam) > 0


def test_intensity_invariant_under_history_permutation():
    rng = np.random.default_rng(19)
    p = random_params(rng, use_attention=True)
    h = hist((2, 0.1), (3, 0.4), (7, 0.8))
    noise = {n: rng.gumbel(size=p.hyper.n_aspects) for n in [0, 2, 3, 7]}
    lam_a = mixed_intensity(p, build_context(p, 0, 1, 0.9, h, noise=noise))
    h_perm = [h[2], h[0], h[1]]
    lam_b = mixed_intensity(p, build_context(p, 0, 1, 0.9, h_perm, noise=noise))
    assert lam_a == pytest.approx(lam_b, abs=1e-12)


def test_no_attention_k1_reduces_to_plain_multivariate_form():
    """Attention off, K=1: base similarity plus kernel-weighted history terms."""
    rng = np.random.default_rng(20)
    p = random_params(rng, k=1, use_attention=False)
    h = hist((2, 0.2), (5, 0.6))
    ctx = build_context(p, 0, 1, 0.9, h)
    delta = float(p.decay[0])
    expect = similarity(p.identity[0], p.identity[1]) * (
        -similarity(p.aspect[0, 0], p.aspect[1, 0])
    )
    for node, th in h:
        expect += (
            similarity(p.identity[node], p.identity[1])
            * (-similarity(p.aspect[node, 0], p.aspect[1, 0]))
            * math.exp(-delta * (0.9 - th))
        )
    assert mixed_intensity(p, ctx) == pytest.approx(expect, abs=1e-12)


def test_candidate_scores_match_mixed_intensity():
    rng = np.random.default_rng(21)
    p = random_params(rng, n_nodes=12)
    h = hist((2, 0.1), (3, 0.5))
    ctx = build_context(p, 0, 1, 0.9, h)
    targets = np.arange(1, 12)
    scores = candidate_scores(p, ctx, targets)
    for v, s in zip(targets, scores):
        assert s == pytest.approx(mixed_intensity(p, ctx.with_target(int(v))), abs=1e-12)


def test_oracle_equivalence_50_fixtures():
    """Whole-pipeline agreement with the straight-line reference, 1e-12."""
    rng = np.random.default_rng(22)
    for trial in range(50):
        use_attention = trial % 2 == 0
        use_gumbel = trial % 3 != 0
        n_hist = trial % 4
        p = random_params(
            rng, use_attention=use_attention, use_gumbel=use_gumbel, k=2 + trial % 3
        )
        nodes = rng.integers(2, p.node_count, size=n_hist)
        times = np.sort(rng.uniform(0, 0.9, size=n_hist))
        h = hist(*[(int(a), float(b)) for a, b in zip(nodes, times)])
        noise = None
        if use_gumbel:
            noise = {}
            for node in [0] + [x for x, _ in h]:
                noise.setdefault(node, rng.gumbel(size=p.hyper.n_aspects))
        ctx = build_context(p, 0, 1, 0.9, h, noise=noise)
        ref_attn, ref_ctx, ref_pis, ref_lam_k, ref_lam = ref_all(p, 0, 1, 0.9, h, noise)
        for k in range(p.hyper.n_aspects):
            assert aspect_intensity(p, ctx, k) == pytest.approx(ref_lam_k[k], abs=1e-12)
        assert mixed_intensity(p, ctx) == pytest.approx(ref_lam, abs=1e-12)


def test_all_contexts_matches_context_op():
    rng = np.random.default_rng(23)
    p = random_params(rng)
    h = hist((2, 0.2), (4, 0.7))
    stacked = all_contexts(p, 0, 0.9, h)
    for k in range(p.hyper.n_aspects):
        assert np.array_equal(stacked[k], context(p, 0, 0.9, h, k))
