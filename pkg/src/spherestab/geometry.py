"""Chart-based closed hypersurfaces of the round unit sphere.

Surfaces M^n in S^(n+1) subset R^(n+2) are described by parametrization
charts (a box of angles with periodicity flags and an immersion map).  Two
families ship with exact closed-form geometry:

* ``equator(n)``     -- the totally geodesic S^n (A == 0, H == 0),
* ``clifford(k, l)`` -- S^k(sqrt(k/n)) x S^l(sqrt(l/n)) with k + l = n,
  the minimal product of round spheres (|A|^2 == n, H == 0).

Conventions.  The unit normal nu is tangent to the ambient sphere and
normal to M; the second fundamental form is the tangential derivative of
nu, ``A_ab = <d_a nu, d_b x>``, so ``H = trace_g A = div_M nu``.  On the
product family nu is oriented so the S^k-factor principal curvatures
(sqrt(l/k), multiplicity k) are positive; the S^l factor contributes
-sqrt(k/l) with multiplicity l.

Charts use hyperspherical coordinates.  Polar axes span [0, pi] and carry
a sampling margin (default 1e-3) so random evaluation never touches a
coordinate pole; quadrature uses interior nodes (Gauss-Legendre on polar
axes, uniform on periodic axes) where the vanishing metric density keeps
integrals accurate.  User-supplied surfaces are loaded from plain-text
chart files and interpolated with C^2 splines; their geometry is computed
by central finite differences (step 1e-5 for first derivatives, 1e-3 for
the curvature stencils, where smaller steps lose to roundoff).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateChart, ImmersionDrift, UnsupportedFamily

POLE_MARGIN = 1e-3
DRIFT_TOL = 1e-8
COND_LIMIT = 1e12
FD_STEP = 1e-5    # first-derivative stencils (jacobians, metric densities)
SHAPE_STEP = 1e-3  # second-fundamental-form stencils; smaller steps are
                   # roundoff-dominated through the SVD normal (measured:
                   # |A|^2 error 2e-10 at 1e-3 vs 2e-7 at 1e-5)


def chord_distance(x, p):
    """Euclidean distance |x - p| along the last axis."""
    return np.linalg.norm(np.asarray(x) - np.asarray(p), axis=-1)


def geodesic_distance(x, p):
    """Great-circle distance on the unit sphere via the chord-arc map 2*asin(c/2)."""
    c = chord_distance(x, p)
    return 2.0 * np.arcsin(np.clip(c / 2.0, 0.0, 1.0))


@dataclass(frozen=True)
class AmbientPoint:
    """A point of the unit sphere S^(n+1) in R^(n+2)."""

    coords: np.ndarray
    dimension: int

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        object.__setattr__(self, "coords", coords)
        if coords.shape != (self.dimension + 2,):
            raise ValueError(f"expected {self.dimension + 2} coordinates, got {coords.shape}")
        if abs(np.linalg.norm(coords) - 1.0) > 1e-12:
            raise ImmersionDrift(f"|coords| = {np.linalg.norm(coords)!r} is not 1 within 1e-12")


# ---------------------------------------------------------------------------
# hyperspherical coordinate helpers for a unit S^k
# ---------------------------------------------------------------------------

def sphere_point(angles):
    """Embed hyperspherical angles (..., k) into the unit S^k subset R^(k+1).

    x_0 = cos t_0, x_i = sin t_0 ... sin t_(i-1) cos t_i, x_k = sin t_0 ... sin t_(k-1).
    Axes 0..k-2 are polar ([0, pi]); the last axis is periodic ([0, 2pi)).
    """
    angles = np.asarray(angles, dtype=float)
    k = angles.shape[-1]
    out = np.empty(angles.shape[:-1] + (k + 1,))
    run = np.ones(angles.shape[:-1])
    for i in range(k):
        out[..., i] = run * np.cos(angles[..., i])
        run = run * np.sin(angles[..., i])
    out[..., k] = run
    return out


def sphere_jacobian(angles):
    """Analytic Jacobian of :func:`sphere_point`, shape (..., k+1, k)."""
    angles = np.asarray(angles, dtype=float)
    k = angles.shape[-1]
    s, c = np.sin(angles), np.cos(angles)
    jac = np.zeros(angles.shape[:-1] + (k + 1, k))
    # prefix[i] = prod_{m<i} sin t_m
    prefix = np.ones(angles.shape[:-1] + (k + 1,))
    for i in range(k):
        prefix[..., i + 1] = prefix[..., i] * s[..., i]
    for a in range(k):
        # d/dt_a of prod_{m<i} sin t_m is the same product with sin t_a -> cos t_a
        for i in range(a + 1, k + 1):
            rest = prefix[..., i] / np.where(s[..., a] == 0.0, 1.0, s[..., a])
            dprod = np.where(s[..., a] == 0.0, 0.0, rest) * c[..., a]
            if i < k:
                jac[..., i, a] = dprod * c[..., i]
            else:
                jac[..., i, a] = dprod
        jac[..., a, a] = -prefix[..., a] * s[..., a]
    return jac


def _sphere_metric_diag(angles):
    """Diagonal of the unit S^k round metric in hyperspherical coordinates."""
    angles = np.asarray(angles, dtype=float)
    k = angles.shape[-1]
    diag = np.ones(angles.shape)
    run = np.ones(angles.shape[:-1])
    for i in range(k):
        diag[..., i] = run
        run = run * np.sin(angles[..., i]) ** 2
    return diag


def _sphere_axes(k):
    """(box rows, periodic flags) for the hyperspherical chart of S^k."""
    boxes = [(0.0, math.pi)] * (k - 1) + [(0.0, 2.0 * math.pi)]
    periodic = (False,) * (k - 1) + (True,)
    return np.array(boxes), periodic


# ---------------------------------------------------------------------------
# charts and surfaces
# ---------------------------------------------------------------------------

@dataclass
class Chart:
    """One parametrization chart: a coordinate box plus an immersion map.

    ``embed`` maps parameter arrays (..., n) to ambient points (..., n+2).
    Optional analytic accessories (``jacobian``, ``metric_diag``,
    ``axis_density``) enable the exact fast paths; without them everything
    falls back to central finite differences of ``embed``.
    """

    box: np.ndarray                      # (n, 2) coordinate bounds
    periodic: tuple
    embed: Callable
    jacobian: Optional[Callable] = None
    metric_diag: Optional[Callable] = None
    axis_density: Optional[list] = None  # per-axis factors of sqrt(det g)
    density_const: float = 1.0
    margin: float = POLE_MARGIN

    @property
    def dim(self):
        return len(self.periodic)

    def sample_box(self, pad=0.0):
        """Coordinate box shrunk by the pole margin (plus pad) on non-periodic axes."""
        box = np.array(self.box, dtype=float)
        for a, per in enumerate(self.periodic):
            if not per:
                box[a, 0] += self.margin + pad
                box[a, 1] -= self.margin + pad
        return box


@dataclass
class CliffordSpec:
    """Exact description of S^k(sqrt(k/n)) x S^l(sqrt(l/n)), k + l = n."""

    k: int
    l: int

    def __post_init__(self):
        if self.k < 1 or self.l < 1:
            raise ValueError("factor dimensions must be >= 1")

    @property
    def n(self):
        return self.k + self.l

    @property
    def radius_sq(self):
        """Exact squared radii (Fraction(k, n), Fraction(l, n)); they sum to 1."""
        return Fraction(self.k, self.n), Fraction(self.l, self.n)

    @property
    def radii(self):
        rk2, rl2 = self.radius_sq
        return math.sqrt(rk2), math.sqrt(rl2)

    @property
    def principal_curvatures(self):
        """(sqrt(l/k) with multiplicity k, -sqrt(k/l) with multiplicity l)."""
        return math.sqrt(Fraction(self.l, self.k)), -math.sqrt(Fraction(self.k, self.l))


@dataclass(frozen=True)
class ShapeData:
    """Pointwise first/second fundamental data of a hypersurface chart."""

    metric: np.ndarray              # (n, n), positive definite
    normal: np.ndarray              # (n+2,), unit, tangent to S^(n+1)
    second_fundamental: np.ndarray  # (n, n), lowered indices
    mean_curvature: float           # trace_g(A)
    norm_A_sq: float                # g^{ac} g^{bd} A_ab A_cd


class ParametrizedHypersurface:
    """A closed n-dimensional hypersurface of S^(n+1) given by charts."""

    def __init__(self, dimension, charts, family="custom", params=(), closed_form=None):
        self.dimension = dimension
        self.charts = list(charts)
        self.family = family
        self.params = tuple(params)
        self._closed_form = closed_form  # (chart_index, U) -> batched shape arrays

    def __repr__(self):
        tag = self.family + (str(self.params) if self.params else "")
        return f"ParametrizedHypersurface(n={self.dimension}, {tag})"

    @property
    def has_closed_form(self):
        return self._closed_form is not None

    def shape_batch(self, chart_index, U):
        """Batched (metric diag or full, normal, A, H, |A|^2) arrays; closed form only."""
        if self._closed_form is None:
            raise UnsupportedFamily(f"{self!r} has no closed-form geometry")
        return self._closed_form(chart_index, U)

    def embed(self, chart_index, U):
        return self.charts[chart_index].embed(np.asarray(U, dtype=float))

    def minimal_immersion_laplacian_factor(self):
        """Delta_M applied to an ambient coordinate x_j is -c * x_j on these surfaces.

        For a minimal hypersurface of the unit sphere the tension field of the
        inclusion into R^(n+2) is -n x, so c = n.  Raises for surfaces without
        that guarantee.
        """
        if self.family in ("equator", "clifford"):
            return float(self.dimension)
        raise UnsupportedFamily("coordinate Laplacian shortcut requires a built-in minimal family")


# ---------------------------------------------------------------------------
# built-in families
# ---------------------------------------------------------------------------

def equator(n):
    """The totally geodesic S^n in S^(n+1): intersection with a coordinate hyperplane."""
    if n < 1:
        raise ValueError("n must be >= 1")
    box, periodic = _sphere_axes(n)

    def embed(U):
        U = np.asarray(U, dtype=float)
        x = sphere_point(U)
        out = np.zeros(U.shape[:-1] + (n + 2,))
        out[..., : n + 1] = x
        return out

    def jacobian(U):
        U = np.asarray(U, dtype=float)
        jac = np.zeros(U.shape[:-1] + (n + 2, n))
        jac[..., : n + 1, :] = sphere_jacobian(U)
        return jac

    def metric_diag(U):
        return _sphere_metric_diag(U)

    density = [_axis_sin_power(n - 1 - a) for a in range(n)]

    def closed_form(chart_index, U):
        U = np.asarray(U, dtype=float)
        base = U.shape[:-1]
        gdiag = metric_diag(U)
        nu = np.zeros(base + (n + 2,))
        nu[..., n + 1] = 1.0
        A = np.zeros(base + (n, n))
        H = np.zeros(base)
        a2 = np.zeros(base)
        return gdiag, nu, A, H, a2

    chart = Chart(box, periodic, embed, jacobian, metric_diag, density, 1.0)
    return ParametrizedHypersurface(n, [chart], "equator", (n,), closed_form)


def clifford_hypersurface(spec):
    """The minimal product S^k(sqrt(k/n)) x S^l(sqrt(l/n)) in S^(n+1).

    Accepts a :class:`CliffordSpec` or a (k, l) pair.  The chart is the
    product of the two factor hyperspherical charts; axes belonging to a
    circle factor (k == 1 or l == 1) are periodic.
    """
    if not isinstance(spec, CliffordSpec):
        spec = CliffordSpec(*spec)
    k, l, n = spec.k, spec.l, spec.n
    rk, rl = spec.radii
    kap_k, kap_l = spec.principal_curvatures

    box_k, per_k = _sphere_axes(k)
    box_l, per_l = _sphere_axes(l)
    box = np.vstack([box_k, box_l])
    periodic = per_k + per_l

    def embed(U):
        U = np.asarray(U, dtype=float)
        xk = sphere_point(U[..., :k]) * rk
        xl = sphere_point(U[..., k:]) * rl
        return np.concatenate([xk, xl], axis=-1)

    def jacobian(U):
        U = np.asarray(U, dtype=float)
        jac = np.zeros(U.shape[:-1] + (n + 2, n))
        jac[..., : k + 1, :k] = sphere_jacobian(U[..., :k]) * rk
        jac[..., k + 1 :, k:] = sphere_jacobian(U[..., k:]) * rl
        return jac

    def metric_diag(U):
        U = np.asarray(U, dtype=float)
        dk = _sphere_metric_diag(U[..., :k]) * rk**2
        dl = _sphere_metric_diag(U[..., k:]) * rl**2
        return np.concatenate([dk, dl], axis=-1)

    density = [_axis_sin_power(k - 1 - a) for a in range(k)]
    density += [_axis_sin_power(l - 1 - a) for a in range(l)]
    density_const = rk**k * rl**l

    def closed_form(chart_index, U):
        U = np.asarray(U, dtype=float)
        base = U.shape[:-1]
        gdiag = metric_diag(U)
        nu = np.concatenate(
            [sphere_point(U[..., :k]) * rl, -sphere_point(U[..., k:]) * rk], axis=-1
        )
        kappa = np.concatenate(
            [np.full(base + (k,), kap_k), np.full(base + (l,), kap_l)], axis=-1
        )
        A = _diag_embed(kappa * gdiag)
        H = np.zeros(base)             # k*sqrt(l/k) - l*sqrt(k/l) == 0 exactly
        a2 = np.full(base, float(n))   # sum of squared curvatures == k*(l/k) + l*(k/l)
        return gdiag, nu, A, H, a2

    chart = Chart(box, periodic, embed, jacobian, metric_diag, density, density_const)
    return ParametrizedHypersurface(n, [chart], "clifford", (k, l), closed_form)


def _axis_sin_power(p):
    if p == 0:
        return lambda t: np.ones_like(np.asarray(t, dtype=float))
    return lambda t, _p=p: np.sin(np.asarray(t, dtype=float)) ** _p


def _diag_embed(diag):
    """(..., n) diagonal entries -> (..., n, n) diagonal matrices."""
    diag = np.asarray(diag)
    n = diag.shape[-1]
    out = np.zeros(diag.shape + (n,))
    idx = np.arange(n)
    out[..., idx, idx] = diag
    return out


# ---------------------------------------------------------------------------
# pointwise shape data
# ---------------------------------------------------------------------------

def shape_at(M, chart_index, u, method="auto", fd_step=SHAPE_STEP):
    """First and second fundamental forms of M at a chart parameter point.

    ``method`` selects the backend: "closed-form" (built-in families),
    "normal-derivative" (A_ab = <d_a nu, d_b x> by finite differences of the
    unit normal) or "hessian" (A_ab = -<nu, d^2_ab x>).  "auto" prefers the
    closed form and otherwise differentiates the normal.

    Raises :class:`DegenerateChart` when cond(g) > 1e12 and
    :class:`ImmersionDrift` when the image leaves the sphere by > 1e-8.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 1:
        raise ValueError("shape_at expects a single parameter point")
    if method == "auto":
        method = "closed-form" if M.has_closed_form else "normal-derivative"

    if method == "closed-form":
        gdiag, nu, A, H, a2 = M.shape_batch(chart_index, u[None, :])
        g = _diag_embed(gdiag)[0]
        _check_metric(g)
        return ShapeData(g, nu[0], A[0], float(H[0]), float(a2[0]))

    chart = M.charts[chart_index]
    x = chart.embed(u)
    if abs(np.linalg.norm(x) - 1.0) > DRIFT_TOL:
        raise ImmersionDrift(f"|x(u)| - 1 = {np.linalg.norm(x) - 1.0:.3e} exceeds {DRIFT_TOL}")
    jac = _chart_jacobian(chart, u, fd_step)
    g = jac.T @ jac
    _check_metric(g)
    nu = _unit_normal(jac, x)

    n = chart.dim
    if method == "normal-derivative":
        dnu = np.empty((n + 2, n))
        for a in range(n):
            e = np.zeros(n)
            e[a] = fd_step
            nu_p = _unit_normal(_chart_jacobian(chart, u + e, fd_step), chart.embed(u + e))
            nu_m = _unit_normal(_chart_jacobian(chart, u - e, fd_step), chart.embed(u - e))
            if nu_p @ nu < 0:
                nu_p = -nu_p
            if nu_m @ nu < 0:
                nu_m = -nu_m
            dnu[:, a] = (nu_p - nu_m) / (2.0 * fd_step)
        A = dnu.T @ jac
        A = 0.5 * (A + A.T)
    elif method == "hessian":
        A = np.empty((n, n))
        for a in range(n):
            for b in range(a, n):
                A[a, b] = A[b, a] = -nu @ _second_partial(chart.embed, u, a, b, fd_step)
    else:
        raise ValueError(f"unknown method {method!r}")

    ginv = np.linalg.inv(g)
    H = float(np.trace(ginv @ A))
    a2 = float(np.trace(ginv @ A @ ginv @ A))
    return ShapeData(g, nu, A, H, a2)


def _check_metric(g):
    eig = np.linalg.eigvalsh(g)
    if eig[0] <= 0 or eig[-1] / eig[0] > COND_LIMIT:
        raise DegenerateChart(f"metric condition number {eig[-1] / max(eig[0], 1e-300):.3e}")


def _chart_jacobian(chart, u, h):
    if chart.jacobian is not None:
        return chart.jacobian(u)
    n = chart.dim
    jac = np.empty((len(chart.embed(u)), n))
    for a in range(n):
        e = np.zeros(n)
        e[a] = h
        jac[:, a] = (chart.embed(u + e) - chart.embed(u - e)) / (2.0 * h)
    return jac


def _second_partial(embed, u, a, b, h):
    ea, eb = np.zeros_like(u), np.zeros_like(u)
    ea[a] = h
    eb[b] = h
    if a == b:
        return (embed(u + ea) - 2.0 * embed(u) + embed(u - ea)) / h**2
    return (
        embed(u + ea + eb) - embed(u + ea - eb) - embed(u - ea + eb) + embed(u - ea - eb)
    ) / (4.0 * h**2)


def _unit_normal(jac, x):
    """Unit vector orthogonal to the chart tangents and to the sphere radius."""
    span = np.column_stack([jac, x])
    u_svd, s, _ = np.linalg.svd(span, full_matrices=True)
    nu = u_svd[:, -1]
    pivot = np.argmax(np.abs(nu))
    return nu if nu[pivot] > 0 else -nu


# ---------------------------------------------------------------------------
# quadrature and area
# ---------------------------------------------------------------------------

def axis_rule(chart, axis, count):
    """1D quadrature nodes/weights for one chart axis.

    Periodic axes get the uniform rule (spectrally accurate for smooth
    integrands); polar axes get Gauss-Legendre, whose nodes stay strictly
    inside (0, pi) so coordinate poles are never evaluated.
    """
    lo, hi = chart.box[axis]
    if chart.periodic[axis]:
        h = (hi - lo) / count
        return lo + h * np.arange(count), np.full(count, h)
    nodes, weights = np.polynomial.legendre.leggauss(count)
    mid, half = (hi + lo) / 2.0, (hi - lo) / 2.0
    return mid + half * nodes, half * weights


def chart_quadrature(chart, resolution):
    """Tensor-product nodes (m, n) and weights (m,) without the metric density."""
    res = _per_axis(resolution, chart.dim)
    rules = [axis_rule(chart, a, res[a]) for a in range(chart.dim)]
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.prod(np.stack([w.ravel() for w in wgrids], axis=0), axis=0)
    return nodes, weights


def _per_axis(resolution, n):
    if np.isscalar(resolution):
        return [int(resolution)] * n
    res = [int(r) for r in resolution]
    if len(res) != n:
        raise ValueError("resolution list length must match the chart dimension")
    return res


def sqrt_det_metric(chart, nodes, fd_step=FD_STEP):
    """sqrt(det g) at parameter nodes, analytic when available."""
    if chart.metric_diag is not None:
        return np.prod(chart.metric_diag(nodes), axis=-1) ** 0.5
    jac = _batched_fd_jacobian(chart, nodes, fd_step)
    g = np.einsum("...ia,...ib->...ab", jac, jac)
    det = np.linalg.det(g)
    if np.any(det <= 0):
        raise DegenerateChart("non-positive metric determinant at a quadrature node")
    return np.sqrt(det)


def _batched_fd_jacobian(chart, nodes, h):
    n = chart.dim
    cols = []
    for a in range(n):
        e = np.zeros(n)
        e[a] = h
        cols.append((chart.embed(nodes + e) - chart.embed(nodes - e)) / (2.0 * h))
    return np.stack(cols, axis=-1)


def area(M, resolution=256):
    """Total area by per-chart quadrature of sqrt(det g).

    Built-in families use the separable closed form (the density factors
    across axes), so any dimension is cheap; generic charts integrate on a
    full tensor grid and are practical for n <= 3.
    """
    total = 0.0
    for chart in M.charts:
        if chart.axis_density is not None:
            res = _per_axis(resolution, chart.dim)
            part = chart.density_const
            for a in range(chart.dim):
                nodes, weights = axis_rule(chart, a, res[a])
                part *= float(weights @ chart.axis_density[a](nodes))
            total += part
        else:
            if chart.dim > 3:
                raise UnsupportedFamily("full-grid quadrature is limited to n <= 3 charts")
            nodes, weights = chart_quadrature(chart, resolution)
            total += float(weights @ sqrt_det_metric(chart, nodes))
    return total


def sample_points(M, count, seed=0, pad=0.0):
    """Random chart parameter points (margin-respecting) and their ambient images.

    Returns (chart_indices, U, X).  Sampling is uniform in chart coordinates;
    use quadrature weights when an area-uniform law matters.
    """
    rng = np.random.default_rng(seed)
    chart_idx = rng.integers(0, len(M.charts), size=count)
    U = np.empty((count, M.dimension))
    X = np.empty((count, M.dimension + 2))
    for c in range(len(M.charts)):
        mask = chart_idx == c
        if not np.any(mask):
            continue
        box = M.charts[c].sample_box(pad)
        U[mask] = rng.uniform(box[:, 0], box[:, 1], size=(int(mask.sum()), M.dimension))
        X[mask] = M.charts[c].embed(U[mask])
    return chart_idx, U, X


def measure_volume_growth(
    M,
    metric="geodesic",
    n_centers=20,
    radii=None,
    resolution=128,
    seed=0,
    safety=1.1,
):
    """Measured area-growth constant C_V with sup area(M cap B_r(x)) / r^n <= C_V.

    The sup runs over sampled on-surface centers and a log-spaced radius
    grid, then takes a 10% safety factor.  ``metric`` selects geodesic balls
    of S^(n+1) or Euclidean (chord) balls of R^(n+2).
    """
    n = M.dimension
    if radii is None:
        radii = np.geomspace(0.05, 1.9, 12)
    dist = geodesic_distance if metric == "geodesic" else chord_distance
    _, _, centers = sample_points(M, n_centers, seed=seed, pad=0.0)
    best = 0.0
    for chart in M.charts:
        if chart.dim > 3:
            raise UnsupportedFamily("volume-growth measurement is limited to n <= 3 charts")
        nodes, weights = chart_quadrature(chart, resolution)
        mass = weights * sqrt_det_metric(chart, nodes)
        X = chart.embed(nodes)
        for c in centers:
            d = dist(X, c)
            for r in radii:
                ratio = float(mass[d <= r].sum()) / r**n
                if ratio > best:
                    best = ratio
    return safety * best


# ---------------------------------------------------------------------------
# plain-text chart files (user-supplied surfaces)
# ---------------------------------------------------------------------------

def save_chart_file(M, path, grid):
    """Write sampled ambient points of every chart in the plain-text format.

    Format: header ``dim n charts c``; per chart a ``box`` line (lo hi per
    axis), a ``periodic`` line (0/1 per axis), a ``grid`` line (points per
    axis), then the row-major grid of ambient points, n+2 floats per line.
    Non-periodic axes include both endpoints; periodic axes omit the wrap
    point.
    """
    grid = _per_axis(grid, M.dimension)
    with open(path, "w") as fh:
        fh.write(f"dim {M.dimension} charts {len(M.charts)}\n")
        for chart in M.charts:
            axes = [
                np.linspace(lo, hi, g, endpoint=not per)
                for (lo, hi), per, g in zip(chart.box, chart.periodic, grid)
            ]
            fh.write("box " + " ".join(repr(float(v)) for v in np.ravel(chart.box)) + "\n")
            fh.write("periodic " + " ".join(str(int(p)) for p in chart.periodic) + "\n")
            fh.write("grid " + " ".join(str(g) for g in grid) + "\n")
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = chart.embed(np.stack([m.ravel() for m in mesh], axis=-1))
            for row in pts:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_chart_file(path):
    """Read a plain-text chart file and build a spline-interpolated surface.

    The sampled grid is interpolated per ambient coordinate with C^2 cubic
    splines (periodic axes are wrap-padded), currently for n in {1, 2}; all
    geometry then runs through the finite-difference backend.
    """
    with open(path) as fh:
        tokens = fh.readline().split()
        if len(tokens) != 4 or tokens[0] != "dim" or tokens[2] != "charts":
            raise ValueError("chart file must start with 'dim n charts c'")
        n, n_charts = int(tokens[1]), int(tokens[3])
        if n not in (1, 2):
            raise UnsupportedFamily("spline chart interpolation supports n in {1, 2}")
        charts = []
        for _ in range(n_charts):
            box = np.array([float(v) for v in fh.readline().split()[1:]]).reshape(n, 2)
            periodic = tuple(bool(int(v)) for v in fh.readline().split()[1:])
            grid = [int(v) for v in fh.readline().split()[1:]]
            rows = np.array(
                [[float(v) for v in fh.readline().split()] for _ in range(int(np.prod(grid)))]
            )
            if rows.shape[1] != n + 2:
                raise ValueError(f"expected {n + 2} floats per grid line")
            values = rows.reshape(grid + [n + 2])
            charts.append(_spline_chart(box, periodic, grid, values))
    return ParametrizedHypersurface(n, charts, family="chartfile")


_PAD = 3  # wrap columns appended on each side of a periodic axis


def _spline_chart(box, periodic, grid, values):
    n = len(grid)
    axes = [
        np.linspace(lo, hi, g, endpoint=not per)
        for (lo, hi), per, g in zip(box, periodic, grid)
    ]
    for a, per in enumerate(periodic):
        if not per:
            continue
        h = axes[a][1] - axes[a][0]
        left = axes[a][:_PAD] + (box[a, 1] - box[a, 0])
        right = axes[a][-_PAD:] - (box[a, 1] - box[a, 0])
        axes[a] = np.concatenate([right, axes[a], left])
        values = np.concatenate(
            [
                np.take(values, range(grid[a] - _PAD, grid[a]), axis=a),
                values,
                np.take(values, range(_PAD), axis=a),
            ],
            axis=a,
        )
        del h

    if n == 1:
        from scipy.interpolate import CubicSpline

        splines = [CubicSpline(axes[0], values[:, j]) for j in range(values.shape[-1])]

        def embed(U):
            U = np.asarray(U, dtype=float)
            t = _wrap_axis(U[..., 0], box[0], periodic[0])
            return np.stack([s(t) for s in splines], axis=-1)

    else:
        from scipy.interpolate import RectBivariateSpline

        splines = [
            RectBivariateSpline(axes[0], axes[1], values[:, :, j], kx=3, ky=3)
            for j in range(values.shape[-1])
        ]

        def embed(U):
            U = np.asarray(U, dtype=float)
            t0 = _wrap_axis(U[..., 0], box[0], periodic[0])
            t1 = _wrap_axis(U[..., 1], box[1], periodic[1])
            flat = [s(t0.ravel(), t1.ravel(), grid=False) for s in splines]
            return np.stack(flat, axis=-1).reshape(U.shape[:-1] + (values.shape[-1],))

    return Chart(np.array(box, dtype=float), tuple(periodic), embed)


def _wrap_axis(t, bounds, per):
    if not per:
        return t
    lo, hi = bounds
    return lo + np.mod(t - lo, hi - lo)
