"""Geometry backends: closed forms, finite differences, areas, chart files."""

import math
from fractions import Fraction

import numpy as np
import pytest

from spherestab import geometry as geo
from spherestab.errors import DegenerateChart, ImmersionDrift, UnsupportedFamily

RNG = np.random.default_rng(42)


# ---------------------------------------------------------------------------
# exact oracles for the product family, in rational arithmetic
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("k,l", [(1, 1), (1, 2), (2, 1), (2, 2), (3, 3), (2, 3), (1, 5)])
def test_product_family_symbolic_oracle(k, l):
    # principal curvatures sqrt(l/k) (x k) and -sqrt(k/l) (x l):
    # trace zero <=> k^2 (l/k) == l^2 (k/l), square sum == n; both exact in Fractions
    n = k + l
    assert Fraction(k) ** 2 * Fraction(l, k) == Fraction(l) ** 2 * Fraction(k, l)
    assert Fraction(k) * Fraction(l, k) + Fraction(l) * Fraction(k, l) == n
    spec = geo.CliffordSpec(k, l)
    rk2, rl2 = spec.radius_sq
    assert rk2 + rl2 == 1  # exact rational identity


def test_ambient_point_validation():
    geo.AmbientPoint(np.array([1.0, 0.0, 0.0, 0.0]), 2)
    with pytest.raises(ImmersionDrift):
        geo.AmbientPoint(np.array([1.0 + 1e-11, 0.0, 0.0, 0.0]), 2)
    with pytest.raises(ValueError):
        geo.AmbientPoint(np.array([1.0, 0.0, 0.0]), 2)


# ---------------------------------------------------------------------------
# shape data
# ---------------------------------------------------------------------------

def test_equator_shape_trivial(equator2):
    _, U, X = geo.sample_points(equator2, 100, seed=1)
    _, _, A, H, a2 = equator2.shape_batch(0, U)   # A == 0 at all 100 points
    assert np.abs(A).max() == 0.0 and np.abs(H).max() == 0.0
    assert np.abs(a2).max() <= 1e-12
    for u in U[:10]:
        sd = geo.shape_at(equator2, 0, u)
        assert np.allclose(sd.second_fundamental, 0.0, atol=1e-14)
        assert sd.mean_curvature == 0.0
    assert np.allclose(np.linalg.norm(X, axis=1), 1.0, atol=1e-12)


def test_equator3_shape_trivial():
    M = geo.equator(3)
    _, U, _ = geo.sample_points(M, 100, seed=2)
    gdiag, nu, A, H, a2 = M.shape_batch(0, U)
    assert np.abs(A).max() == 0.0
    assert np.abs(H).max() == 0.0
    assert np.abs(a2).max() <= 1e-12


def test_torus_shape(torus):
    _, U, _ = geo.sample_points(torus, 20, seed=3)
    for u in U[:5]:
        sd = geo.shape_at(torus, 0, u)
        assert sd.norm_A_sq == 2.0          # |A|^2 = n exactly in the closed form
        assert sd.mean_curvature == 0.0
        assert np.allclose(sd.metric, 0.5 * np.eye(2))  # flat induced metric


def test_clifford21_principal_curvatures():
    M = geo.clifford_hypersurface((2, 1))
    _, U, _ = geo.sample_points(M, 5, seed=4)
    sd = geo.shape_at(M, 0, U[0])
    kappa = np.sort(np.linalg.eigvalsh(np.linalg.solve(sd.metric, sd.second_fundamental)))
    expected = np.sort([math.sqrt(0.5), math.sqrt(0.5), -math.sqrt(2.0)])
    assert np.allclose(kappa, expected, atol=1e-12)
    assert abs(sd.norm_A_sq - 3.0) <= 1e-12
    assert abs(sd.mean_curvature) <= 1e-12


def test_clifford_minimality_invariants(clifford_families):
    for (k, l), M in clifford_families.items():
        n = k + l
        _, U, X = geo.sample_points(M, 200, seed=5)
        gdiag, nu, A, H, a2 = M.shape_batch(0, U)
        assert np.abs(H).max() <= 1e-10
        assert np.abs(a2 - n).max() <= 1e-10
        # stored H matches trace_g(A)
        trace = np.einsum("ma,maa->m", 1.0 / gdiag, A)
        assert np.abs(trace - H).max() <= 1e-10
        # normals are unit, tangent to the sphere, orthogonal to the chart frame
        assert np.allclose(np.linalg.norm(nu, axis=1), 1.0, atol=1e-12)
        assert np.abs(np.einsum("mi,mi->m", nu, X)).max() <= 1e-12
        jac = M.charts[0].jacobian(U)
        assert np.abs(np.einsum("mia,mi->ma", jac, nu)).max() <= 1e-10


def test_clifford12_radii():
    spec = geo.CliffordSpec(1, 2)
    rk, rl = spec.radii
    assert rk == math.sqrt(1.0 / 3.0) and rl == math.sqrt(2.0 / 3.0)


def test_generic_backends_match_closed_form():
    M = geo.clifford_hypersurface((2, 1))
    _, U, _ = geo.sample_points(M, 5, seed=6, pad=0.05)
    for u in U:
        cf = geo.shape_at(M, 0, u)
        nd = geo.shape_at(M, 0, u, method="normal-derivative")
        he = geo.shape_at(M, 0, u, method="hessian")
        # O(h^2) truncation with h = 1e-3 on a curved chart
        assert abs(nd.norm_A_sq - cf.norm_A_sq) <= 5e-6
        assert abs(nd.mean_curvature) <= 5e-6
        assert abs(he.norm_A_sq - cf.norm_A_sq) <= 1e-4   # second differences are noisier
        # A matrices agree up to the normal orientation sign
        diff = min(
            np.abs(nd.second_fundamental - cf.second_fundamental).max(),
            np.abs(nd.second_fundamental + cf.second_fundamental).max(),
        )
        assert diff <= 5e-6


def test_normal_derivative_vs_hessian_refinement():
    # the two A computations agree to O(h^2): errors shrink ~4x per halving
    M = geo.clifford_hypersurface((1, 2))
    u = geo.sample_points(M, 1, seed=7, pad=0.05)[1][0]
    errs = []
    for h in (2e-3, 1e-3, 5e-4):
        nd = geo.shape_at(M, 0, u, method="normal-derivative", fd_step=h)
        he = geo.shape_at(M, 0, u, method="hessian", fd_step=h)
        diff = min(
            np.abs(nd.second_fundamental - he.second_fundamental).max(),
            np.abs(nd.second_fundamental + he.second_fundamental).max(),
        )
        errs.append(diff)
    assert errs[0] > errs[1] > errs[2]
    assert errs[0] / errs[2] > 8.0  # at least order ~1.5 over 4x step reduction


def test_chart_invariance_reparametrized_torus(torus):
    # same surface under a shifted chart: |A|^2 and H agree where charts overlap
    base = torus.charts[0]
    off = np.array([0.7, 1.3])
    chart2 = geo.Chart(base.box.copy(), base.periodic, lambda U: base.embed(np.asarray(U) + off))
    M2 = geo.ParametrizedHypersurface(2, [chart2], family="custom")
    _, U, _ = geo.sample_points(torus, 5, seed=8)
    for u in U:
        sd2 = geo.shape_at(M2, 0, u - off)       # same ambient point
        assert abs(sd2.norm_A_sq - 2.0) <= 1e-8
        assert abs(sd2.mean_curvature) <= 1e-8


def test_degenerate_chart_raises():
    M = geo.clifford_hypersurface((2, 1))
    with pytest.raises(DegenerateChart):
        geo.shape_at(M, 0, np.array([1e-9, 0.3, 0.4]))  # at the coordinate pole


def test_immersion_drift_raises(torus):
    base = torus.charts[0]
    bad = geo.Chart(base.box.copy(), base.periodic, lambda U: 1.001 * base.embed(U))
    M = geo.ParametrizedHypersurface(2, [bad], family="custom")
    with pytest.raises(ImmersionDrift):
        geo.shape_at(M, 0, np.array([0.3, 0.4]))


# ---------------------------------------------------------------------------
# areas
# ---------------------------------------------------------------------------

def test_area_equator2(equator2):
    assert abs(geo.area(equator2, 256) - 4.0 * math.pi) <= 1e-6


def test_area_torus(torus):
    # product of circumferences (2 pi / sqrt 2)^2 = 2 pi^2
    assert abs(geo.area(torus, 256) - 2.0 * math.pi**2) <= 1e-8


def test_area_clifford12():
    M = geo.clifford_hypersurface((1, 2))
    expected = (2.0 * math.pi / math.sqrt(3.0)) * (4.0 * math.pi * 2.0 / 3.0)
    assert abs(geo.area(M, 256) - expected) <= 1e-6


def test_area_clifford33():
    # each factor S^3(sqrt(1/2)) has volume (1/2)^{3/2} * 2 pi^2
    M = geo.clifford_hypersurface((3, 3))
    expected = (0.5**1.5 * 2.0 * math.pi**2) ** 2
    assert abs(geo.area(M, 128) - expected) <= 1e-8


def test_volume_growth_bounds(torus):
    cv = geo.measure_volume_growth(torus, resolution=128)
    # flat density ~ pi at small radii, total-area ratio ~ 5.5 near r = 2
    assert math.pi < cv < 10.0


# ---------------------------------------------------------------------------
# chart files
# ---------------------------------------------------------------------------

def test_chart_file_roundtrip(tmp_path, torus):
    path = tmp_path / "torus.chart"
    _, U, X = geo.sample_points(torus, 6, seed=11)
    errs = []
    for res in (128, 192):
        geo.save_chart_file(torus, path, res)
        loaded = geo.load_chart_file(path)
        assert loaded.dimension == 2
        assert np.abs(loaded.charts[0].embed(U) - X).max() < 1e-7
        sd = geo.shape_at(loaded, 0, U[0])
        errs.append(abs(sd.norm_A_sq - 2.0))
        assert abs(sd.mean_curvature) < 1e-3
    assert errs[1] < errs[0]  # spline geometry converges under grid refinement


def test_chart_file_coarse_grid_drifts(tmp_path, torus):
    path = tmp_path / "coarse.chart"
    geo.save_chart_file(torus, path, 48)
    loaded = geo.load_chart_file(path)
    u = geo.sample_points(torus, 1, seed=12)[1][0]
    with pytest.raises(ImmersionDrift):
        geo.shape_at(loaded, 0, u)


def test_chart_file_polar_axis(tmp_path, equator2):
    path = tmp_path / "s2.chart"
    geo.save_chart_file(equator2, path, 128)
    loaded = geo.load_chart_file(path)
    assert abs(geo.area(loaded, 96) - 4.0 * math.pi) < 1e-5
    sd = geo.shape_at(loaded, 0, np.array([1.0, 2.0]))
    assert sd.norm_A_sq < 1e-6


def test_chart_file_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.chart"
    path.write_text("charts 1 dim 2\n")
    with pytest.raises(ValueError):
        geo.load_chart_file(path)


def test_chart_file_dimension_limit(tmp_path):
    path = tmp_path / "big.chart"
    path.write_text("dim 3 charts 1\n")
    with pytest.raises(UnsupportedFamily):
        geo.load_chart_file(path)
