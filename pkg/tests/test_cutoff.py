"""Covers, discard, packing bounds, cutoff fields and their integrals."""

import math

import numpy as np
import pytest

from spherestab import cutoff as cut
from spherestab import geometry as geo
from spherestab.errors import (
    BudgetInfeasible,
    PreconditionViolated,
    UnsupportedFamily,
)
from spherestab.fields import AmbientCoordinateField, ConstantField


# ---------------------------------------------------------------------------
# cover construction
# ---------------------------------------------------------------------------

def test_cover_single_point_uses_budget():
    cov = cut.cover_singular_set(np.array([[1.0, 0, 0, 0, 0, 0]]), n=4, q=2, epsilon=0.1)
    # uniform split of 90% of the budget: r = (0.9 * 0.1)^(1/2) = 0.3
    assert cov.size == 1
    assert abs(cov.radii[0] - 0.3) <= 1e-12
    assert cov.radii[0] ** 2 < 0.1
    assert cov.satisfied


def test_cover_empty_set():
    cov = cut.cover_singular_set(None, 2, 1, 0.1)
    assert cov.size == 0 and cov.satisfied
    field = cut.build_inf_cutoff(cov)
    X = np.eye(4)
    assert np.all(field.value(X) == 1.0)
    assert np.all(field.ambient_gradient(X) == 0.0)


def test_cover_ten_separated_points():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(10, 9))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    cov = cut.cover_singular_set(pts, n=7, q=4, epsilon=0.01)
    assert cov.size == 10
    assert np.all(cov.radii**3 < 1e-3)
    assert np.all(cov.radii < 0.1)
    assert cov.satisfied


def test_cover_budget_infeasible():
    pts = np.eye(4)[:3]
    with pytest.raises(BudgetInfeasible):
        cut.cover_singular_set(pts, n=2, q=1, epsilon=0.001, r_min=0.01)
    with pytest.raises(BudgetInfeasible):  # q = n: sum r^0 = count >= epsilon
        cut.cover_singular_set(pts, n=2, q=2, epsilon=0.1)


def test_cover_budget_invariant_random():
    rng = np.random.default_rng(7)
    for _ in range(50):
        m = int(rng.integers(1, 12))
        pts = rng.normal(size=(m, 5))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        n, q = 3, float(rng.uniform(0.5, 2.5))
        eps = float(rng.uniform(0.05, 0.5))
        try:
            cov = cut.cover_singular_set(pts, n, q, eps)
        except BudgetInfeasible:
            continue
        assert cov.budget_sum < eps
        assert np.all(cov.radii < 1.0)
        assert cut.covers_points(cov, 1.0)
        classes = cov.dyadic_classes
        assert sum(len(ix) for ix in classes.values()) == cov.size
        for mexp, ix in classes.items():
            assert np.all(cov.radii[ix] >= 2.0**mexp)
            assert np.all(cov.radii[ix] < 2.0 ** (mexp + 1))


def test_point_cloud_roundtrip(tmp_path):
    path = tmp_path / "sing.txt"
    path.write_text("# synthetic singular set\n1.0 0.0 0.0 0.0\n0.0 1.0 0.0 0.0\n")
    pts = cut.load_point_cloud(path)
    assert pts.shape == (2, 4)
    cov = cut.cover_singular_set(pts, n=2, q=1, epsilon=0.2)
    assert cov.size == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("1.0 0.0\n1.0 0.0 0.0\n")
    with pytest.raises(ValueError):
        cut.load_point_cloud(bad)
    empty = tmp_path / "empty.txt"
    empty.write_text("\n")
    assert cut.load_point_cloud(empty).size == 0


def test_cover_clusters_nearby_points():
    pts = np.array([[1.0, 0, 0, 0], [1.0, 1e-4, 0, 0], [0, 1, 0, 0]])
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    cov = cut.cover_singular_set(pts, n=2, q=1, epsilon=0.2, r_min=1e-3)
    assert cov.size == 2  # first two merge
    assert cut.covers_points(cov, 1.0)


# ---------------------------------------------------------------------------
# vitali discard
# ---------------------------------------------------------------------------

def test_vitali_identical_and_disjoint():
    two = cut.BallCover(np.zeros((2, 3)), np.array([0.1, 0.1]), 2, 1, 10, "euclidean")
    assert cut.vitali_discard(two).size == 1
    far = cut.BallCover(np.array([[0.0, 0, 0], [9.0, 0, 0]]), np.array([0.1, 0.2]),
                        2, 1, 10, "euclidean")
    assert cut.vitali_discard(far).size == 2


def test_vitali_random_family_disjoint_and_covering():
    rng = np.random.default_rng(3)
    centers = rng.random((50, 3))
    radii = rng.uniform(0.02, 0.3, 50)
    cov = cut.BallCover(centers, radii, 3, 1, 1e9, "euclidean",
                        points=centers, containment="sixth")
    out = cut.vitali_discard(cov)
    d = np.linalg.norm(out.centers[:, None] - out.centers[None], axis=-1)
    off = ~np.eye(out.size, dtype=bool)
    rsum = (out.radii[:, None] + out.radii[None]) / 6.0
    assert np.all(d[off] >= rsum[off] - 1e-12)       # sixth-balls pairwise disjoint
    assert cut.covers_points(out, 0.5)               # half-balls still cover


def test_vitali_on_geodesic_cover(torus):
    # end-to-end on the sphere: sixth-containment cover, discard, coverage
    _, _, pts = geo.sample_points(torus, 12, seed=13)
    cov = cut.cover_singular_set(pts, n=2, q=1, epsilon=0.6, containment="sixth")
    assert cut.covers_points(cov, 1.0 / 6.0)
    out = cut.vitali_discard(cov)
    assert cut.covers_points(out, 0.5)
    for i in range(out.size):
        for j in range(i + 1, out.size):
            d = geo.geodesic_distance(out.centers[i], out.centers[j])
            assert d >= (out.radii[i] + out.radii[j]) / 6.0 - 1e-12


def test_vitali_order_independent():
    rng = np.random.default_rng(11)
    centers = rng.random((30, 2))
    radii = rng.uniform(0.05, 0.4, 30)  # distinct with probability 1
    cov = cut.BallCover(centers, radii, 2, 1, 1e9, "euclidean")
    out1 = cut.vitali_discard(cov)
    perm = rng.permutation(30)
    out2 = cut.vitali_discard(cut.BallCover(centers[perm], radii[perm], 2, 1, 1e9, "euclidean"))
    key1 = sorted(map(tuple, np.column_stack([out1.centers, out1.radii])))
    key2 = sorted(map(tuple, np.column_stack([out2.centers, out2.radii])))
    assert key1 == key2


# ---------------------------------------------------------------------------
# packing bounds
# ---------------------------------------------------------------------------

def test_intersection_bound_tight_intervals():
    centers = np.array([[1.0], [3.0], [5.0]])
    max_degree, bound = cut.intersection_bound_check(centers, np.ones(3), 1, 1)
    assert max_degree == 2 and bound == 2.0


def test_intersection_bound_preconditions():
    with pytest.raises(PreconditionViolated):  # overlapping sub-balls
        cut.intersection_bound_check(np.array([[0.0], [0.5]]), np.ones(2), 1, 1)
    with pytest.raises(PreconditionViolated):  # radii not comparable
        cut.intersection_bound_check(np.array([[0.0], [9.0]]), np.array([1.0, 3.0]), 1, 2)


def random_admissible_family(rng, N, alpha, beta, max_balls=12):
    m_target = int(rng.integers(3, max_balls + 1))
    radii_pool = rng.uniform(1.0, beta, size=m_target * 60)
    L = (m_target ** (1.0 / N)) * (2.0 * beta / alpha) * 1.6
    pool = rng.uniform(0.0, L, size=(m_target * 60, N))
    centers, radii = [], []
    for cand, r in zip(pool, radii_pool):
        if all(np.linalg.norm(cand - c) >= (r + rc) / alpha for c, rc in zip(centers, radii)):
            centers.append(cand)
            radii.append(r)
            if len(centers) == m_target:
                break
    return np.array(centers), np.array(radii)


def test_intersection_bound_random_sample():
    # quick slice of the property suite; the full 10^3-per-combination run
    # lives in the acceptance tests
    rng = np.random.default_rng(5)
    for N in (1, 2, 3):
        for alpha in (1, 2, 3):
            for beta in (1, 2):
                for _ in range(40):
                    centers, radii = random_admissible_family(rng, N, alpha, beta)
                    deg, bound = cut.intersection_bound_check(centers, radii, alpha, beta)
                    assert deg <= bound
                    if (N, alpha, beta) == (2, 3, 2):
                        assert bound == 323.0  # 18^2 - 1


def test_enlarged_class_count_after_discard():
    rng = np.random.default_rng(9)
    centers = rng.random((60, 2))
    radii = rng.uniform(0.01, 0.5, 60)
    out = cut.vitali_discard(
        cut.BallCover(centers, radii, 2, 0, 1e9, "euclidean", containment="sixth")
    )
    worst, bound = cut.enlarged_class_count(out)
    assert worst <= bound
    assert bound == 108.0**2


# ---------------------------------------------------------------------------
# cutoff fields
# ---------------------------------------------------------------------------

def one_ball_cover(radius, metric, n=2):
    center = np.zeros(4)
    center[0] = 1.0
    return cut.BallCover(center[None], np.array([radius]), n, 1.0, 1.0, metric,
                         points=center[None])


def sphere_cloud(count, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(count, 4))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def test_inf_cutoff_one_ball_profile():
    field = cut.build_inf_cutoff(one_ball_cover(0.2, "geodesic"))
    t = 0.3  # geodesic distance = 1.5 r: midpoint of the ramp
    x = np.array([[math.cos(t), math.sin(t), 0.0, 0.0]])
    assert abs(field.value(x)[0] - 0.5) <= 1e-12


def test_inf_cutoff_invariants():
    r = 0.25
    field = cut.build_inf_cutoff(one_ball_cover(r, "geodesic"))
    X = sphere_cloud(4000, seed=1)
    vals = field.value(X)
    d = geo.geodesic_distance(X, field.cover.centers[0])
    assert np.all((0.0 <= vals) & (vals <= 1.0))
    assert np.all(vals[d <= r] == 0.0)
    assert np.all(vals[d >= 2 * r] == 1.0)
    grads = np.linalg.norm(field.ambient_gradient(X), axis=1)
    # |grad phi| <= 2/r on the annulus (the linear ramp has slope 1/r; the
    # chord-arc correction stays below 2/r for r < 1)
    assert np.all(grads <= 2.0 / r + 1e-12)


def test_inf_cutoff_multi_ball_slope_bound(torus):
    _, _, pts = geo.sample_points(torus, 4, seed=6)
    cov = cut.cover_singular_set(pts, n=2, q=1, epsilon=0.3)
    field = cut.build_inf_cutoff(cov)
    X = sphere_cloud(5000, seed=2)
    grads = np.linalg.norm(field.ambient_gradient(X), axis=1)
    assert np.all(grads <= np.max(2.0 / cov.radii) + 1e-12)


def test_product_cutoff_profile_sets():
    r = 0.3
    field = cut.build_product_cutoff(one_ball_cover(r, "euclidean"))
    X = sphere_cloud(4000, seed=3)
    d = geo.chord_distance(X, field.cover.centers[0])
    vals = field.value(X)
    assert np.all(vals[d <= r / 2] == 0.0)
    assert np.all(vals[d >= r] == 1.0)
    assert np.all((0.0 <= vals) & (vals <= 1.0))


def test_product_cutoff_c0_bound():
    # |D phi|^2 + |D^2 phi| <= C0 r^-2 at 10^4 sampled points
    r = 0.2
    field = cut.build_product_cutoff(one_ball_cover(r, "euclidean"))
    X = sphere_cloud(10_000, seed=4)
    grads = field.ambient_gradient(X)
    hess = field.ambient_hessian(X)
    total = np.sum(grads**2, axis=1) + np.linalg.norm(hess, ord=2, axis=(1, 2))
    assert np.all(total <= field.C0 / r**2 * (1.0 + 1e-9))


def test_product_cutoff_derivatives_match_fd():
    field = cut.build_product_cutoff(
        cut.BallCover(
            np.array([[1.0, 0, 0, 0], [0.96, 0.28, 0, 0]]),
            np.array([0.3, 0.22]), 2, 1.0, 1.0, "euclidean",
        )
    )
    X = sphere_cloud(50, seed=5)
    h = 1e-6
    for x in X[:20]:
        g = field.ambient_gradient(x[None])[0]
        H = field.ambient_hessian(x[None])[0]
        for a in range(4):
            e = np.zeros(4)
            e[a] = h
            fd = (field.value((x + e)[None]) - field.value((x - e)[None]))[0] / (2 * h)
            assert abs(fd - g[a]) <= 1e-6
            fd_row = (
                field.ambient_gradient((x + e)[None])[0]
                - field.ambient_gradient((x - e)[None])[0]
            ) / (2 * h)
            assert np.abs(fd_row - H[a]).max() <= 1e-4


def test_inf_cutoff_has_no_hessian():
    field = cut.build_inf_cutoff(one_ball_cover(0.2, "geodesic"))
    with pytest.raises(UnsupportedFamily):
        field.ambient_hessian(np.eye(4))


def test_unsatisfied_cover_rejected():
    cov = cut.BallCover(np.eye(4)[:1], np.array([0.5]), 2, 1.0, 0.1, "geodesic")
    assert not cov.satisfied
    with pytest.raises(PreconditionViolated):
        cut.build_inf_cutoff(cov)


# ---------------------------------------------------------------------------
# gradient integral estimate
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def m12():
    return geo.clifford_hypersurface((1, 2))


@pytest.fixture(scope="module")
def m12_cv(m12):
    return geo.measure_volume_growth(m12, resolution=64)


def test_gradient_estimate_feasible_case(m12, m12_cv):
    _, _, pts = geo.sample_points(m12, 5, seed=7, pad=0.05)
    cov = cut.cover_singular_set(pts, n=3, q=2, epsilon=0.05)
    field = cut.build_inf_cutoff(cov)
    rep = cut.gradient_integral_estimate(m12, cov, field, 2, C_V=m12_cv)
    assert rep.passed
    assert rep.stderr <= 0.1 * rep.bound
    assert rep.integral <= rep.bound + 3 * rep.stderr


def test_gradient_estimate_epsilon_linearity(m12, m12_cv):
    _, _, pts = geo.sample_points(m12, 3, seed=8, pad=0.05)
    values = {}
    for eps in (0.05, 0.025):
        cov = cut.cover_singular_set(pts, n=3, q=2, epsilon=eps)
        field = cut.build_inf_cutoff(cov)
        rep = cut.gradient_integral_estimate(m12, cov, field, 2, C_V=m12_cv, seed=1)
        values[eps] = rep
    assert abs(values[0.025].bound - values[0.05].bound / 2.0) <= 1e-12
    # integral scales ~linearly in the budget (within Monte-Carlo error)
    ratio = values[0.05].integral / values[0.025].integral
    assert 1.5 <= ratio <= 2.5


def test_gradient_estimate_torus_q1(torus, torus_cv_geodesic):
    _, _, pts = geo.sample_points(torus, 3, seed=2)
    cov = cut.cover_singular_set(pts, n=2, q=1, epsilon=0.1)
    field = cut.build_inf_cutoff(cov)
    rep = cut.gradient_integral_estimate(torus, cov, field, 1, C_V=torus_cv_geodesic)
    assert rep.passed


def test_gradient_estimate_empty_cover(torus, torus_cv_geodesic):
    cov = cut.empty_cover(2, 1, 0.05, ambient_dim=4)
    field = cut.build_inf_cutoff(cov)
    rep = cut.gradient_integral_estimate(torus, cov, field, 1, C_V=torus_cv_geodesic)
    assert rep.integral == 0.0 and rep.stderr == 0.0


def test_gradient_estimate_off_surface_ball_skipped(torus, torus_cv_geodesic):
    # a ball far from the surface contributes exactly zero
    center = np.array([[0.0, 0.0, 1.0, 0.0]])  # on S^3 but max-distance from the torus? close enough
    cov = cut.BallCover(center, np.array([0.01]), 2, 1.0, 0.1, "geodesic")
    field = cut.build_inf_cutoff(cov)
    rep = cut.gradient_integral_estimate(torus, cov, field, 1, C_V=torus_cv_geodesic)
    assert rep.integral == 0.0


# ---------------------------------------------------------------------------
# smooth-cutoff quality report
# ---------------------------------------------------------------------------

def test_mr_quality_report_one_ball(torus, torus_cv_chord):
    _, _, pts = geo.sample_points(torus, 1, seed=5)
    eps = 0.05
    r = math.sqrt(0.8 * eps)
    cov = cut.BallCover(pts, np.array([r]), 2, 0.0, eps, "euclidean",
                        points=pts, containment="sixth")
    field = cut.build_product_cutoff(cov)
    rep = cut.mr_quality_report(torus, field, C_V=torus_cv_chord, seed=0)
    assert rep.passed
    assert rep.area_not_one.value < rep.bounds[0]
    # per-ball Laplacian mass <= C1 C_V r^(k-2) (k = 2 here)
    assert rep.lap_l1.value <= rep.c1 * rep.c_v + 3 * rep.lap_l1.stderr


def test_mr_area_against_quadrature_oracle(torus, torus_cv_chord):
    # independent oracle for H^2({phi != 1}): deterministic indicator
    # quadrature of the ball region on a fine grid
    _, _, pts = geo.sample_points(torus, 1, seed=5)
    r = 0.25
    cov = cut.BallCover(pts, np.array([r]), 2, 0.0, 0.1, "euclidean",
                        points=pts, containment="sixth")
    field = cut.build_product_cutoff(cov)
    rep = cut.mr_quality_report(torus, field, C_V=torus_cv_chord, seed=1)
    from spherestab.geometry import chart_quadrature, chord_distance, sqrt_det_metric

    chart = torus.charts[0]
    nodes, weights = chart_quadrature(chart, 768)
    w = weights * sqrt_det_metric(chart, nodes)
    oracle = float(w[chord_distance(chart.embed(nodes), pts[0]) < r].sum())
    assert abs(rep.area_not_one.value - oracle) <= 4.0 * rep.area_not_one.stderr + 1e-3
    assert oracle <= torus_cv_chord * r**2  # the area form of the growth bound


def test_mr_quality_report_empty(torus, torus_cv_chord):
    field = cut.build_product_cutoff(cut.empty_cover(2, 0.0, 0.05, metric="euclidean", ambient_dim=4))
    rep = cut.mr_quality_report(torus, field, C_V=torus_cv_chord, strata=24)
    assert rep.area_not_one.value == 0.0
    assert rep.grad_l2.value == 0.0
    assert rep.lap_l1.value == 0.0


# ---------------------------------------------------------------------------
# integration by parts
# ---------------------------------------------------------------------------

def test_ibp_empty_cover_equator(equator2):
    u = AmbientCoordinateField(0)
    resid = cut.ibp_residual(equator2, cut.empty_cover(2, 1, 0.1, ambient_dim=4), u, u)
    assert resid <= 1e-8


def test_ibp_cross_term_decreases(torus):
    _, _, pts = geo.sample_points(torus, 1, seed=2)
    u = AmbientCoordinateField(0, scale=math.sqrt(2.0))
    crosses = []
    for eps in (0.1, 0.05, 0.025):
        cov = cut.cover_singular_set(pts, n=2, q=1, epsilon=eps)
        field = cut.build_inf_cutoff(cov)
        crosses.append(cut.cutoff_cross_term(torus, field, u))
    assert crosses[0] > crosses[1] > crosses[2] > 0.0


def test_ibp_residual_small_at_tight_budget(torus):
    _, _, pts = geo.sample_points(torus, 1, seed=2)
    u = AmbientCoordinateField(0, scale=math.sqrt(2.0))
    cov = cut.cover_singular_set(pts, n=2, q=1, epsilon=0.01)
    resid = cut.ibp_residual(torus, cov, u, u)
    assert resid <= 1e-4


def test_ibp_exponent_consistency_guard(torus):
    _, _, pts = geo.sample_points(torus, 1, seed=2)
    cov = cut.cover_singular_set(pts, n=2, q=1, epsilon=0.05)
    u = ConstantField(1.0)
    with pytest.raises(PreconditionViolated):
        cut.ibp_residual(torus, cov, u, u, q=1.5)


def test_ibp_constant_u_divergence_form(torus):
    # u == 1: residual reduces to |int phi Delta v + int <grad v, grad phi>|
    _, _, pts = geo.sample_points(torus, 1, seed=4)
    cov = cut.cover_singular_set(pts, n=2, q=1, epsilon=0.01)
    v = AmbientCoordinateField(2, scale=math.sqrt(2.0))
    resid = cut.ibp_residual(torus, cov, ConstantField(1.0), v)
    assert resid <= 1e-6
