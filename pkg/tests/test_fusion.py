import numpy as np
import pytest

from mvfuse import (
    FeatureImage,
    InvalidInputError,
    StatisticsError,
    VertexBank,
    aggregate_views,
    back_project,
    check_convex_variance_inequality,
    estimate_variance_stats,
    estimate_variance_stats_pooled,
    rasterization_variance_bound,
    rasterize_back,
    variance_align,
)

from oracles import recombination_variance


def bank_of(features, weights, visible=None):
    features = np.asarray(features, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if visible is None:
        visible = weights > 0
    return VertexBank(features, weights, visible)


def random_agg(sphere, frags, scores, rng, channels=4):
    planes = [
        FeatureImage(rng.normal(size=frag.face_index.shape + (channels,)), frag.foreground)
        for frag in frags
    ]
    views = [
        back_project(p, f, s, sphere) for p, f, s in zip(planes, frags, scores)
    ]
    agg = aggregate_views(VertexBank.from_views(views), 3.0)
    # give uncovered vertices defined values so stats stay well-posed
    agg.features[agg.fallback] = rng.normal(size=(int(agg.fallback.sum()), channels))
    return agg, planes


def test_aggregate_symmetry():
    bank = bank_of([[[0.0]], [[1.0]]], [[0.5], [0.5]])
    for tau_w in (1.0, 3.0, 6.0):
        agg = aggregate_views(bank, tau_w)
        assert np.isclose(agg.features[0, 0], 0.5)


def test_aggregate_mixing_coefficients():
    # weights (1, 2) at tau_w = 3 mix as (1/9, 8/9)
    bank = bank_of([[[0.0]], [[1.0]]], [[1.0], [2.0]])
    agg = aggregate_views(bank, 3.0)
    assert np.isclose(agg.features[0, 0], 8.0 / 9.0)
    assert np.array_equal(agg.coverage, [2])


def test_aggregate_zero_weight_fallback():
    bank = bank_of([[[4.0]], [[7.0]]], [[0.0], [0.0]], visible=[[False], [False]])
    agg = aggregate_views(bank, 3.0, fallback=np.array([[2.5]]))
    assert agg.fallback[0]
    assert np.isclose(agg.features[0, 0], 2.5)
    no_fb = aggregate_views(bank, 3.0)
    assert np.isfinite(no_fb.features).all()


def test_aggregate_convexity_between_views():
    # fused value stays between the two per-view estimates per vertex
    rng = np.random.default_rng(5)
    feats = rng.normal(size=(2, 30, 3))
    weights = rng.uniform(0.05, 1.0, size=(2, 30))
    agg = aggregate_views(bank_of(feats, weights), 3.0)
    lo = feats.min(axis=0)
    hi = feats.max(axis=0)
    assert (agg.features >= lo - 1e-12).all()
    assert (agg.features <= hi + 1e-12).all()


def test_rasterize_back_constant_and_background(sphere, sphere_frags, rng):
    agg_features = np.full((sphere.vertex_count, 2), 0.9)
    from mvfuse import AggregatedMesh

    agg = AggregatedMesh(
        agg_features, np.ones(sphere.vertex_count, dtype=int), np.zeros(sphere.vertex_count, bool)
    )
    originals = [
        FeatureImage(rng.normal(size=f.face_index.shape + (2,)), f.foreground)
        for f in sphere_frags
    ]
    planes = rasterize_back(agg, sphere, sphere_frags, originals)
    for plane, frag, orig in zip(planes, sphere_frags, originals):
        fg = frag.foreground
        assert np.abs(plane.data[fg] - 0.9).max() < 1e-6
        assert np.array_equal(plane.data[~fg], orig.data[~fg])


def test_rasterize_back_matches_per_pixel_oracle(sphere, sphere_frags, sphere_scores, rng):
    agg, _ = random_agg(sphere, sphere_frags, sphere_scores, rng)
    originals = [
        FeatureImage(np.zeros(f.face_index.shape + (4,)), f.foreground) for f in sphere_frags
    ]
    planes = rasterize_back(agg, sphere, sphere_frags, originals)
    frag, plane = sphere_frags[0], planes[0]
    rows, cols = np.nonzero(frag.foreground)
    for r, c in zip(rows[:50], cols[:50]):
        tri = sphere.faces[frag.face_index[r, c]]
        expected = frag.barycentric[r, c] @ agg.features[tri]
        assert np.allclose(plane.data[r, c], expected, atol=1e-6)


def test_variance_stats_constant_features(sphere, sphere_frags):
    from mvfuse import AggregatedMesh

    agg = AggregatedMesh(
        np.full((sphere.vertex_count, 3), 2.0),
        np.ones(sphere.vertex_count, dtype=int),
        np.zeros(sphere.vertex_count, bool),
    )
    originals = [FeatureImage(np.zeros(sphere_frags[0].face_index.shape + (3,)), sphere_frags[0].foreground)]
    plane = rasterize_back(agg, sphere, sphere_frags[:1], originals)[0]
    stats = estimate_variance_stats(agg, sphere_frags[0], plane, sphere)
    assert np.allclose(stats.std_2d, 0.0, atol=1e-9)
    assert np.allclose(stats.std_3d, 0.0, atol=1e-9)
    assert np.allclose(stats.mean_3d, 2.0)


def test_variance_stats_match_brute_force(sphere, sphere_frags, sphere_scores, rng):
    agg, _ = random_agg(sphere, sphere_frags, sphere_scores, rng)
    originals = [FeatureImage(np.zeros((32, 32, 4)), f.foreground) for f in sphere_frags]
    planes = rasterize_back(agg, sphere, sphere_frags, originals)
    for frag, plane in zip(sphere_frags, planes):
        stats = estimate_variance_stats(agg, frag, plane, sphere)
        brute = recombination_variance(sphere, frag, agg.features)
        assert np.allclose(stats.std_3d**2, brute, rtol=1e-6)


def test_variance_stats_single_triangle(rng):
    # densely rasterized single triangle: only the coefficients vary
    from mvfuse import AggregatedMesh, Camera, Mesh, rasterize

    cam = Camera(0, 0, 2.5, 50, (48, 48))
    mesh = Mesh(
        np.array([[-1.2, -1.0, 0.0], [1.2, -1.0, 0.0], [0.0, 1.3, 0.0]]),
        np.array([[0, 1, 2]]),
    )
    frag = rasterize(mesh, cam)
    assert frag.foreground.sum() > 100
    agg = AggregatedMesh(rng.normal(size=(3, 4)), np.ones(3, int), np.zeros(3, bool))
    plane = rasterize_back(agg, mesh, [frag], [FeatureImage(np.zeros((48, 48, 4)), frag.foreground)])[0]
    stats = estimate_variance_stats(agg, frag, plane, mesh)
    brute = recombination_variance(mesh, frag, agg.features)
    assert np.allclose(stats.std_3d**2, brute, rtol=1e-6)
    assert stats.std_3d.min() > 0


def test_variance_stats_too_few_pixels(sphere):
    from mvfuse import AggregatedMesh, FragmentBuffer

    frag = FragmentBuffer(
        np.full((4, 4), -1, dtype=np.int32), np.zeros((4, 4, 3)), np.full((4, 4), np.inf)
    )
    agg = AggregatedMesh(np.zeros((sphere.vertex_count, 1)), np.zeros(sphere.vertex_count, int), np.zeros(sphere.vertex_count, bool))
    with pytest.raises(StatisticsError):
        estimate_variance_stats(agg, frag, FeatureImage(np.zeros((4, 4, 1)), frag.foreground), sphere)


def test_eq10_bound_holds(sphere, sphere_frags, sphere_scores, rng):
    agg, _ = random_agg(sphere, sphere_frags, sphere_scores, rng)
    originals = [FeatureImage(np.zeros((32, 32, 4)), f.foreground) for f in sphere_frags]
    planes = rasterize_back(agg, sphere, sphere_frags, originals)
    for frag, plane in zip(sphere_frags, planes):
        stats = estimate_variance_stats(agg, frag, plane, sphere)
        bound = rasterization_variance_bound(agg, frag, sphere)
        assert (stats.std_2d**2 <= bound + 1e-9).all()


def test_variance_align_fixed_point(sphere, sphere_frags, sphere_scores, rng):
    from mvfuse import VarianceStats

    plane = FeatureImage(rng.normal(size=(32, 32, 2)), sphere_frags[0].foreground)
    fg = plane.foreground
    vals = plane.data[fg]
    stats = VarianceStats(
        vals.mean(axis=0), vals.std(axis=0), vals.mean(axis=0), vals.std(axis=0)
    )
    aligned = variance_align(plane, stats)
    assert np.abs(aligned.data - plane.data).max() < 1e-9


def test_variance_align_rescales_deviations():
    from mvfuse import VarianceStats

    fg = np.ones((1, 4), dtype=bool)
    plane = FeatureImage(np.array([[[-0.5], [-0.25], [0.25], [0.5]]]), fg)
    stats = VarianceStats(
        np.array([0.0]), np.array([0.5]), np.array([0.0]), np.array([1.0])
    )
    aligned = variance_align(plane, stats)
    assert np.allclose(aligned.data[0, :, 0], [-1.0, -0.5, 0.5, 1.0])


def test_variance_align_postconditions_and_idempotence(sphere, sphere_frags, sphere_scores, rng):
    agg, _ = random_agg(sphere, sphere_frags, sphere_scores, rng)
    frag = sphere_frags[0]
    plane = rasterize_back(
        agg, sphere, [frag], [FeatureImage(rng.normal(size=(32, 32, 4)), frag.foreground)]
    )[0]
    stats = estimate_variance_stats(agg, frag, plane, sphere)
    aligned = variance_align(plane, stats)
    vals = aligned.data[frag.foreground]
    assert np.abs(vals.std(axis=0) - stats.std_3d).max() < 1e-6
    assert np.abs(vals.mean(axis=0) - stats.mean_3d).max() < 1e-6
    # second application with recomputed statistics is a fixed point
    stats2 = estimate_variance_stats(agg, frag, aligned, sphere)
    again = variance_align(aligned, stats2)
    assert np.abs(again.data - aligned.data).max() < 1e-9


def test_variance_align_constant_passthrough(sphere, sphere_frags):
    from mvfuse import VarianceStats

    plane = FeatureImage(np.full((32, 32, 1), 0.4), sphere_frags[0].foreground)
    stats = VarianceStats(np.array([0.4]), np.array([0.0]), np.array([1.0]), np.array([0.7]))
    out = variance_align(plane, stats)
    assert np.array_equal(out.data, plane.data)


def test_jensen_identical_sets():
    x = np.linspace(0, 1, 20)
    ok, slack = check_convex_variance_inequality(
        np.array([0.3, 0.3, 0.4]), np.stack([x, x, x])
    )
    assert ok
    assert abs(slack) < 1e-12


def test_jensen_single_point_weight():
    rng = np.random.default_rng(2)
    samples = rng.normal(size=(3, 15))
    ok, slack = check_convex_variance_inequality(np.array([1.0, 0.0, 0.0]), samples)
    assert ok
    assert abs(slack) < 1e-12


def test_jensen_randomized_trials(rng):
    for _ in range(500):
        k = int(rng.integers(2, 6))
        m = int(rng.integers(2, 30))
        w = rng.uniform(0, 1, size=k)
        w /= w.sum()
        ok, slack = check_convex_variance_inequality(w, rng.normal(size=(k, m)) * 3)
        assert ok
        assert slack >= -1e-9


def test_jensen_invalid_weights():
    with pytest.raises(InvalidInputError):
        check_convex_variance_inequality(np.array([0.5, 0.6]), np.zeros((2, 5)))
    with pytest.raises(InvalidInputError):
        check_convex_variance_inequality(np.array([1.5, -0.5]), np.zeros((2, 5)))


def test_pooled_stats_consistent(sphere, sphere_frags, sphere_scores, rng):
    agg, _ = random_agg(sphere, sphere_frags, sphere_scores, rng)
    originals = [FeatureImage(np.zeros((32, 32, 4)), f.foreground) for f in sphere_frags]
    planes = rasterize_back(agg, sphere, sphere_frags, originals)
    pooled = estimate_variance_stats_pooled(agg, sphere_frags, planes, sphere)
    vals = np.concatenate([p.data[f.foreground] for p, f in zip(planes, sphere_frags)])
    assert np.allclose(pooled.std_2d, vals.std(axis=0))
    assert np.allclose(pooled.std_3d**2, vals.var(axis=0), rtol=1e-6)


def test_constant_propagation_end_to_end(sphere, sphere_frags, sphere_scores):
    planes = [
        FeatureImage(np.where(f.foreground[:, :, None], 0.25, 0.0), f.foreground)
        for f in sphere_frags
    ]
    views = [back_project(p, f, s, sphere) for p, f, s in zip(planes, sphere_frags, sphere_scores)]
    agg = aggregate_views(VertexBank.from_views(views), 3.0)
    covered = ~agg.fallback
    assert np.abs(agg.features[covered] - 0.25).max() < 1e-6
    agg.features[agg.fallback] = 0.25
    out = rasterize_back(agg, sphere, sphere_frags, planes)
    for plane, frag in zip(out, sphere_frags):
        assert np.abs(plane.data[frag.foreground] - 0.25).max() < 1e-6
