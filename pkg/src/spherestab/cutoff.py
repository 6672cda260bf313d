"""Ball covers of synthetic singular sets and the two cutoff constructions.

Two cutoff fields are built over a finite cover {B(p_i, r_i)} whose radii
satisfy the budget ``sum_i r_i^(n-q) < epsilon``:

* the *inf* cutoff: linear ramps ``phi_i`` vanishing on B(p_i, r_i),
  reaching 1 outside B(p_i, 2 r_i) with slope 1/r_i <= 2/r_i, combined as
  ``phi = inf_i phi_i`` (Lipschitz, gradient taken from the active ramp);
* the *product* cutoff: a C^2 quintic ramp per ball vanishing on
  B(p_i, r_i/2), equal to 1 outside B(p_i, r_i), multiplied together.  The
  profile constant C0 with ``|D phi|^2 + |D^2 phi| <= C0 r^-2`` is computed
  from the quintic once and carried on the field.

The quantitative facts verified numerically: the gradient estimate
``int_M |grad phi|^q <= 2^(n+q) C_V epsilon``; the Vitali-style discard
(sixth-balls pairwise disjoint, half-balls still cover); the packing bound
``max degree <= (3 alpha beta)^N - 1`` for balls with disjoint sub-balls
and beta-comparable radii; the smooth-cutoff quality triple (area of
{phi != 1}, grad L^2, Laplacian L^1) against its proof-side constants; and
the vanishing of the cutoff cross term in integration by parts.

Geodesic balls of the ambient sphere are used for the gradient estimate
(radii converted by the chord-arc map); the smooth product construction
uses plain Euclidean balls of R^(n+2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    BoundViolation,
    BudgetInfeasible,
    InsufficientSamples,
    PreconditionViolated,
    UnsupportedFamily,
)
from .geometry import (
    ParametrizedHypersurface,
    chord_distance,
    geodesic_distance,
    measure_volume_growth,
)
from .sampling import (
    MCEstimate,
    ZERO_ESTIMATE,
    local_polar_integral,
    nearest_chart_point,
    stratified_integral,
)

BUDGET_SHARE = 0.9   # fraction of epsilon the greedy cover actually spends


# ---------------------------------------------------------------------------
# quintic ramp profile (product cutoff)
# ---------------------------------------------------------------------------

def _quintic(t):
    t = np.clip(t, 0.0, 1.0)
    return ((6.0 * t - 15.0) * t + 10.0) * t**3


def _quintic_d1(t):
    inside = (t > 0.0) & (t < 1.0)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 30.0 * t**2 * (1.0 - t) ** 2, 0.0)


def _quintic_d2(t):
    inside = (t > 0.0) & (t < 1.0)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 60.0 * t * (2.0 * t - 1.0) * (t - 1.0), 0.0)


def _profile_c0():
    """sup over the unit ramp of |D phi|^2 + |D^2 phi| (radius-1 ball)."""
    s = np.linspace(0.5, 1.0, 200_001)
    t = 2.0 * s - 1.0
    d1 = 2.0 * _quintic_d1(t)
    d2 = 4.0 * _quintic_d2(t)
    val = d1**2 + np.maximum(np.abs(d2), d1 / s)
    return float(val.max()) * (1.0 + 1e-9)


PRODUCT_C0 = _profile_c0()


# ---------------------------------------------------------------------------
# ball covers
# ---------------------------------------------------------------------------

def _cover_distance(metric):
    return geodesic_distance if metric == "geodesic" else chord_distance


def load_point_cloud(path):
    """Singular-set points from plain text: one point per line, floats."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append([float(tok) for tok in line.split()])
    if not rows:
        return np.empty((0, 1))
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError("inconsistent coordinate count across point-cloud lines")
    return np.array(rows)


@dataclass
class BallCover:
    """Finite ball family with its Hausdorff-budget bookkeeping.

    ``dimension`` is the surface dimension n and ``exponent`` the q of the
    budget ``sum r_i^(n-q) < epsilon``.  ``points`` keeps the covered input
    set so discard operations can re-verify coverage.
    """

    centers: np.ndarray
    radii: np.ndarray
    dimension: int
    exponent: float
    epsilon: float
    metric: str = "geodesic"
    points: Optional[np.ndarray] = None
    containment: str = "full"     # input points lie in B(p, r) ("full") or B(p, r/6)

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        self.radii = np.atleast_1d(np.asarray(self.radii, dtype=float))
        if self.centers.size == 0:
            self.centers = self.centers.reshape(0, max(self.centers.shape[-1], 1))

    @property
    def size(self):
        return len(self.radii)

    @property
    def budget_sum(self):
        if self.size == 0:
            return 0.0
        return float(np.sum(self.radii ** (self.dimension - self.exponent)))

    @property
    def satisfied(self):
        return self.budget_sum < self.epsilon

    @property
    def dyadic_classes(self):
        """Partition {i : 2^m <= r_i < 2^(m+1)} keyed by the integer m."""
        out = {}
        for i, r in enumerate(self.radii):
            out.setdefault(int(np.floor(np.log2(r))), []).append(i)
        return {m: np.array(ix) for m, ix in out.items()}

    def subset(self, indices):
        return BallCover(
            self.centers[indices],
            self.radii[indices],
            self.dimension,
            self.exponent,
            self.epsilon,
            self.metric,
            self.points,
            self.containment,
        )


def empty_cover(n, q, epsilon, metric="geodesic", ambient_dim=1):
    return BallCover(
        np.empty((0, ambient_dim)), np.empty(0), n, q, epsilon, metric,
        points=np.empty((0, ambient_dim)),
    )


def cover_singular_set(
    points,
    n,
    q,
    epsilon,
    r_min=1e-3,
    metric="geodesic",
    containment="full",
):
    """Greedy ball cover of a finite point set under the budget sum r^(n-q) < epsilon.

    Points closer than 2*r_min are clustered (single linkage); each cluster
    gets a ball at its (sphere-projected) centroid.  Radii default to the
    uniform budget split ``(0.9 epsilon / m)^(1/(n-q))`` and never drop
    below the cluster containment radius or r_min.

    Raises :class:`BudgetInfeasible` when ``m * r_min^(n-q) >= epsilon`` (in
    particular whenever q >= n and the set is nonempty with epsilon <= m):
    no admissible radii exist; lower r_min or raise epsilon.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    points = np.atleast_2d(np.asarray(points, dtype=float)) if points is not None else None
    if points is None or points.size == 0:
        return empty_cover(n, q, epsilon, metric)
    dist = _cover_distance(metric)

    clusters = _single_linkage(points, 2.0 * r_min, dist)
    m = len(clusters)
    if m * r_min ** (n - q) >= epsilon:
        raise BudgetInfeasible(
            f"{m} cluster(s) with r_min={r_min} give sum r^(n-q) >= {m * r_min ** (n - q):.3g}"
            f" >= epsilon={epsilon}; lower r_min or raise epsilon"
        )

    factor = 6.0 if containment == "sixth" else 1.0
    centers = np.empty((m, points.shape[1]))
    need = np.empty(m)
    for i, idx in enumerate(clusters):
        c = points[idx].mean(axis=0)
        if metric == "geodesic":
            c = c / np.linalg.norm(c)
        centers[i] = c
        spread = float(np.max(dist(points[idx], c))) if len(idx) > 1 else float(dist(points[idx][0], c))
        need[i] = factor * spread * (1.0 + 1e-9)

    radii = np.maximum(need, r_min)
    if n != q:
        r_star = (BUDGET_SHARE * epsilon / m) ** (1.0 / (n - q))
        if n > q and r_star > 0:
            radii = np.maximum(radii, min(r_star, 0.95))
    if np.any(radii >= 1.0):
        raise BudgetInfeasible("a cluster needs radius >= 1; the set is not coverable")
    cover = BallCover(centers, radii, n, q, epsilon, metric, points=points,
                      containment=containment)
    if not cover.satisfied:
        raise BudgetInfeasible(
            f"sum r^(n-q) = {cover.budget_sum:.3g} >= epsilon = {epsilon}"
        )
    return cover


def _single_linkage(points, link, dist):
    m = len(points)
    parent = list(range(m))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(m):
        d = dist(points, points[i])
        for j in np.flatnonzero(d <= link):
            ri, rj = find(i), find(int(j))
            if ri != rj:
                parent[ri] = rj
    groups = {}
    for i in range(m):
        groups.setdefault(find(i), []).append(i)
    return [np.array(ix) for ix in sorted(groups.values(), key=lambda ix: int(ix[0]))]


def vitali_discard(cover: BallCover) -> BallCover:
    """Keep a subfamily whose sixth-balls are pairwise disjoint.

    Balls are visited in decreasing radius (ties broken by lexicographic
    center order); a ball is dropped when its sixth-ball meets the
    sixth-ball of a retained, at-least-as-large ball -- its sixth-ball then
    lies inside that ball's half-ball, so the retained half-balls still
    cover the input points.
    """
    if cover.size == 0:
        return cover
    dist = _cover_distance(cover.metric)
    keys = tuple(cover.centers.T[::-1]) + (-cover.radii,)
    order = np.lexsort(keys)
    retained = []
    for j in order:
        pj, rj = cover.centers[j], cover.radii[j]
        clash = False
        for i in retained:
            if dist(pj, cover.centers[i]) < (cover.radii[i] + rj) / 6.0:
                clash = True
                break
        if not clash:
            retained.append(int(j))
    retained = sorted(retained)
    out = cover.subset(np.array(retained))
    return out


def covers_points(cover: BallCover, factor) -> bool:
    """Every input point within factor * r_i of some center (brute force)."""
    if cover.points is None or len(cover.points) == 0:
        return True
    if cover.size == 0:
        return False
    dist = _cover_distance(cover.metric)
    for p in cover.points:
        if not np.any(dist(cover.centers, p) <= factor * cover.radii + 1e-12):
            return False
    return True


# ---------------------------------------------------------------------------
# packing / intersection bounds
# ---------------------------------------------------------------------------

def intersection_bound_check(centers, radii, alpha, beta):
    """Max intersection degree of a ball family against (3 alpha beta)^N - 1.

    Preconditions (checked): the sub-balls B(p_i, r_i/alpha) are pairwise
    disjoint and the radii are beta-comparable (sup r <= beta inf r).
    Euclidean balls in R^N.  Raises :class:`BoundViolation` if the packing
    bound fails -- it cannot, the point of the check is the verification.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radii = np.asarray(radii, dtype=float)
    m, N = centers.shape
    if m == 0:
        return 0, (3.0 * alpha * beta) ** N - 1
    if radii.max() > beta * radii.min() * (1.0 + 1e-12):
        raise PreconditionViolated(
            f"radii not {beta}-comparable: sup/inf = {radii.max() / radii.min():.3f}"
        )
    diff = centers[:, None, :] - centers[None, :, :]
    d = np.linalg.norm(diff, axis=-1)
    rsum = radii[:, None] + radii[None, :]
    off = ~np.eye(m, dtype=bool)
    if np.any(d[off] < (rsum[off] / alpha) * (1.0 - 1e-12)):
        raise PreconditionViolated("sub-balls B(p_i, r_i/alpha) are not pairwise disjoint")
    degrees = np.sum((d <= rsum) & off, axis=1)
    max_degree = int(degrees.max())
    bound = (3.0 * alpha * beta) ** N - 1
    if max_degree > bound:
        raise BoundViolation(f"degree {max_degree} exceeds ({3 * alpha * beta})^{N} - 1")
    return max_degree, bound


def enlarged_class_count(cover: BallCover):
    """Per dyadic class, max count of enlarged balls B(p_i, r_i + r_j) containing p_j.

    Valid after :func:`vitali_discard` (disjoint sixth-balls): within one
    class the enlarged radii are 2-comparable and their 18th-part sub-balls
    inherit disjointness, so the count is at most 108^N.
    """
    N = cover.centers.shape[1]
    bound = 108.0**N
    worst = 0
    dist = _cover_distance(cover.metric)
    for _, idx in cover.dyadic_classes.items():
        for j in idx:
            d = dist(cover.centers[idx], cover.centers[j])
            count = int(np.sum(d <= cover.radii[idx] + cover.radii[j]))
            worst = max(worst, count)
    if worst > bound:
        raise BoundViolation(f"class count {worst} exceeds 108^{N}")
    return worst, bound


# ---------------------------------------------------------------------------
# cutoff fields
# ---------------------------------------------------------------------------

@dataclass
class CutoffField:
    """Evaluable cutoff 0 <= phi <= 1 built over a ball cover.

    inf kind:  phi = min_i clip((d_i - r_i)/r_i, 0, 1); vanishes on every
    B(p_i, r_i), equals 1 outside the union of B(p_i, 2 r_i), and the active
    ramp has |grad phi| <= 2/r_i on its annulus.  Only Lipschitz: no
    Laplacian.

    product kind:  phi = prod_i rho(d_i / r_i) with the C^2 quintic ramp
    rho supported on [1/2, 1]; vanishes on every B(p_i, r_i/2), equals 1
    outside the union of B(p_i, r_i), and each factor obeys
    |D phi_i|^2 + |D^2 phi_i| <= C0 r_i^-2 with the stored C0.
    """

    cover: BallCover
    kind: str
    C0: float = PRODUCT_C0

    # -- distances ---------------------------------------------------------
    def _dist_grad(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        diff = X[:, None, :] - self.cover.centers[None, :, :]
        chord = np.linalg.norm(diff, axis=-1)
        safe = np.where(chord > 1e-300, chord, 1.0)
        direction = diff / safe[..., None]
        if self.cover.metric == "geodesic":
            d = 2.0 * np.arcsin(np.clip(chord / 2.0, 0.0, 1.0))
            scale = 1.0 / np.sqrt(np.clip(1.0 - (chord / 2.0) ** 2, 1e-12, None))
            grad_d = direction * scale[..., None]
        else:
            d = chord
            grad_d = direction
        return d, grad_d

    def _ramps(self, d):
        r = self.cover.radii[None, :]
        if self.kind == "inf":
            vals = np.clip((d - r) / r, 0.0, 1.0)
            slope = np.where((d > r) & (d < 2.0 * r), 1.0 / r, 0.0)
            return vals, slope
        t = 2.0 * (d / r) - 1.0
        vals = _quintic(t)
        slope = _quintic_d1(t) * 2.0 / r
        return vals, slope

    # -- evaluation --------------------------------------------------------
    def value(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.cover.size == 0:
            return np.ones(X.shape[0])
        d, _ = self._dist_grad(X)
        vals, _ = self._ramps(d)
        return vals.min(axis=1) if self.kind == "inf" else vals.prod(axis=1)

    def active_index(self, X):
        """Index of the ball whose ramp achieves the inf (lowest index on ties)."""
        if self.kind != "inf":
            raise UnsupportedFamily("active ball is only defined for the inf kind")
        d, _ = self._dist_grad(np.atleast_2d(X))
        vals, _ = self._ramps(d)
        return vals.argmin(axis=1)

    def ambient_gradient(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.cover.size == 0:
            return np.zeros_like(X)
        d, grad_d = self._dist_grad(X)
        vals, slope = self._ramps(d)
        if self.kind == "inf":
            act = vals.argmin(axis=1)
            take = np.arange(X.shape[0])
            return slope[take, act][:, None] * grad_d[take, act]
        other = _product_excluding_one(vals)
        return np.einsum("pi,pi,pij->pj", other, slope, grad_d, optimize=True)

    def ambient_hessian(self, X):
        """Euclidean Hessian of the product cutoff (sum and cross terms)."""
        if self.kind != "product":
            raise UnsupportedFamily("the inf cutoff is Lipschitz only; no Hessian")
        if self.cover.metric != "euclidean":
            raise UnsupportedFamily("product-cutoff Hessians are Euclidean-ball only")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        p, dim = X.shape
        if self.cover.size == 0:
            return np.zeros((p, dim, dim))
        d, grad_d = self._dist_grad(X)
        vals, slope = self._ramps(d)
        r = self.cover.radii[None, :]
        t = 2.0 * (d / r) - 1.0
        curv = _quintic_d2(t) * 4.0 / r**2
        other = _product_excluding_one(vals)
        eye = np.eye(dim)
        safe_d = np.where(d > 1e-300, d, 1.0)
        out = np.zeros((p, dim, dim))
        for i in range(self.cover.size):
            gi = grad_d[:, i, :]
            proj = gi[:, :, None] * gi[:, None, :]
            Hi = curv[:, i, None, None] * proj + (slope[:, i] / safe_d[:, i])[
                :, None, None
            ] * (eye[None] - proj)
            out += other[:, i, None, None] * Hi
        grads = slope[..., None] * grad_d          # (p, balls, dim)
        for i in range(self.cover.size):
            for j in range(self.cover.size):
                if i == j:
                    continue
                pair = np.where(vals[:, j] > 0.0, other[:, i] / np.where(vals[:, j] > 0.0, vals[:, j], 1.0), 0.0)
                out += pair[:, None, None] * grads[:, i, :, None] * grads[:, j, None, :]
        return out


def _product_excluding_one(vals):
    """prod_{j != i} vals[:, j] via prefix/suffix products (zero-safe)."""
    p, m = vals.shape
    prefix = np.ones((p, m + 1))
    suffix = np.ones((p, m + 1))
    for i in range(m):
        prefix[:, i + 1] = prefix[:, i] * vals[:, i]
        suffix[:, m - 1 - i] = suffix[:, m - i] * vals[:, m - 1 - i]
    return prefix[:, :m] * suffix[:, 1:]


def build_inf_cutoff(cover: BallCover) -> CutoffField:
    """Infimum-of-ramps cutoff over a satisfied cover."""
    if cover.size and not cover.satisfied:
        raise PreconditionViolated("cover budget not satisfied")
    return CutoffField(cover, "inf")


def build_product_cutoff(cover: BallCover) -> CutoffField:
    """Smooth product cutoff (C^2 quintic ramps) over a satisfied Euclidean cover."""
    if cover.size and not cover.satisfied:
        raise PreconditionViolated("cover budget not satisfied")
    if cover.size and cover.metric != "euclidean":
        raise PreconditionViolated("the product construction uses Euclidean balls")
    return CutoffField(cover, "product", PRODUCT_C0)


# ---------------------------------------------------------------------------
# surface calculus of ambient fields
# ---------------------------------------------------------------------------

def tangential_gradient_sq(M, chart_index, U, ambient_grad):
    """|grad_M phi|^2 from an ambient gradient via the chart frame."""
    chart = M.charts[chart_index]
    jac = chart.jacobian(np.asarray(U, dtype=float))
    comps = np.einsum("pia,pi->pa", jac, ambient_grad, optimize=True)
    gdiag = chart.metric_diag(np.asarray(U, dtype=float))
    return np.sum(comps**2 / gdiag, axis=-1)


def surface_laplacian_of_cutoff(M, chart_index, U, X, field: CutoffField):
    """Delta_Sigma phi = tr_Sigma Hess phi + <grad phi, H_vec> at surface points.

    Needs the Euclidean Hessian (product kind) and the mean curvature
    vector of M in R^(n+2); for the built-in minimal families that vector
    is -n x.
    """
    n = M.minimal_immersion_laplacian_factor()
    chart = M.charts[chart_index]
    jac = chart.jacobian(np.asarray(U, dtype=float))
    gdiag = chart.metric_diag(np.asarray(U, dtype=float))
    hess = field.ambient_hessian(X)
    trace = np.einsum("pia,pij,pja,pa->p", jac, hess, jac, 1.0 / gdiag, optimize=True)
    drift = -n * np.einsum("pj,pj->p", field.ambient_gradient(X), X)
    return trace + drift


# ---------------------------------------------------------------------------
# quantitative reports
# ---------------------------------------------------------------------------

@dataclass
class GradientIntegralReport:
    integral: float
    stderr: float
    bound: float
    epsilon: float
    c_v: float
    q: float
    dimension: int
    samples: int

    @property
    def passed(self):
        return self.integral <= self.bound + 3.0 * self.stderr


def gradient_integral_estimate(
    M: ParametrizedHypersurface,
    cover: BallCover,
    field: CutoffField,
    q,
    C_V=None,
    strata=14,
    samples_per_cell=3,
    seed=0,
    chart_index=0,
) -> GradientIntegralReport:
    """Monte-Carlo  int_M |grad phi|^q  against the bound 2^(n+q) C_V epsilon.

    Integration is per ball on a chart box around it (the integrand lives on
    thin annuli; global sampling would miss them), deduplicated by the
    active-ball partition.  Raises :class:`InsufficientSamples` when the
    standard error exceeds 10% of the bound and :class:`BoundViolation` if
    the estimate exceeds bound + 3 stderr.
    """
    if field.kind != "inf":
        raise PreconditionViolated("the gradient estimate applies to the inf cutoff")
    n = M.dimension
    if C_V is None:
        C_V = measure_volume_growth(
            M, metric="geodesic" if cover.metric == "geodesic" else "chord"
        )
    bound = 2.0 ** (n + q) * C_V * cover.epsilon

    total = ZERO_ESTIMATE
    rng_children = np.random.SeedSequence(seed).spawn(max(cover.size, 1))
    for i in range(cover.size):
        reach = 2.0 * cover.radii[i]
        box = _ball_chart_box(M, chart_index, cover.centers[i], reach, cover.metric)
        if box is None:
            continue

        def integrand(U, X, i=i):
            act = field.active_index(X)
            grad = field.ambient_gradient(X)
            gsq = tangential_gradient_sq(M, chart_index, U, grad)
            return np.where(act == i, gsq ** (q / 2.0), 0.0)

        est = stratified_integral(
            M,
            integrand,
            chart_index=chart_index,
            box=box,
            strata=strata,
            samples_per_cell=samples_per_cell,
            seed=rng_children[i],
        )
        total = total + est

    if total.stderr > 0.1 * bound:
        raise InsufficientSamples(
            f"stderr {total.stderr:.3g} exceeds 10% of the bound {bound:.3g}"
        )
    report = GradientIntegralReport(
        total.value, total.stderr, bound, cover.epsilon, C_V, q, n, total.samples
    )
    if not report.passed:
        raise BoundViolation(
            f"int |grad phi|^q = {report.integral:.4g} exceeds {bound:.4g} + 3 stderr"
        )
    return report


def _ball_chart_box(M, chart_index, center, reach, metric, safety=1.5):
    """Chart box guaranteed to contain M cap B(center, reach); None if disjoint."""
    chart = M.charts[chart_index]
    n = chart.dim
    u0 = nearest_chart_point(M, center, chart_index)
    x0 = chart.embed(u0)
    dist = _cover_distance(metric)
    reach_geo = 2.0 * np.arcsin(np.clip(reach / 2.0, 0.0, 1.0)) if metric == "euclidean" else reach
    if geodesic_distance(x0, center) >= reach_geo:
        return None
    gdiag = chart.metric_diag(u0)
    width = safety * reach_geo / np.sqrt(gdiag)
    for _ in range(6):
        box = np.stack([u0 - width, u0 + width], axis=-1)
        clipped = False
        for a, per in enumerate(chart.periodic):
            lo, hi = chart.box[a]
            if per:
                if width[a] * 2 >= hi - lo:
                    box[a] = (lo, hi)
            else:
                if box[a, 0] < lo or box[a, 1] > hi:
                    box[a] = np.clip(box[a], lo, hi)
                    clipped = True
        if _box_excludes_ball(chart, box, center, reach, dist):
            return box
        if clipped:
            raise PreconditionViolated(
                "ball region is cut by the chart box; move it away from a pole"
            )
        width *= 1.4
    raise PreconditionViolated("could not bound the ball region in chart coordinates")


def _box_excludes_ball(chart, box, center, reach, dist, face_samples=7):
    """Every face of the chart box lies outside the ball (so the box covers it)."""
    n = chart.dim
    axes = [np.linspace(box[a, 0], box[a, 1], face_samples) for a in range(n)]
    for a in range(n):
        lo, hi = chart.box[a]
        if chart.periodic[a] and np.isclose(box[a, 0], lo) and np.isclose(box[a, 1], hi):
            continue  # full periodic axis has no face
        for side in (0, 1):
            sub = [axes[b] for b in range(n) if b != a]
            mesh = np.meshgrid(*sub, indexing="ij") if sub else []
            pts = np.empty(((face_samples ** max(n - 1, 0)), n))
            col = 0
            for b in range(n):
                if b == a:
                    pts[:, b] = box[a, side]
                else:
                    pts[:, b] = mesh[col].ravel()
                    col += 1
            if np.any(dist(chart.embed(pts), center) <= reach):
                return False
    return True


@dataclass
class MRQualityReport:
    """Measured quality triple of a product cutoff with its proof-side bounds."""

    area_not_one: MCEstimate
    grad_l2: MCEstimate
    lap_l1: MCEstimate
    bounds: tuple
    epsilon: float
    c_v: float
    c0: float
    c1: float
    ambient_dim: int

    @property
    def passed(self):
        ests = (self.area_not_one, self.grad_l2, self.lap_l1)
        return all(e.value <= b + 3.0 * e.stderr for e, b in zip(ests, self.bounds))


def mr_quality_report(
    M: ParametrizedHypersurface,
    field: CutoffField,
    C_V=None,
    strata=96,
    samples_per_cell=2,
    seed=0,
    chart_index=0,
) -> MRQualityReport:
    """Measure (area{phi != 1}, int |grad phi|^2, int |Delta phi|) for a product cutoff.

    Bounds come from the construction's proof: C_V eps, 8 * 108^N C0 C_V eps
    and (C1 + 8 * 108^N C0) C_V eps with C1 = n C0 + C_H sqrt(C0), C_H the
    ambient mean-curvature bound (n for minimal hypersurfaces of the unit
    sphere) and N the Euclidean dimension.
    """
    if field.kind != "product":
        raise PreconditionViolated("quality report applies to the product cutoff")
    n = M.dimension
    N = n + 2
    if C_V is None:
        C_V = measure_volume_growth(M, metric="chord")
    eps = field.cover.epsilon
    c0 = field.C0
    c_h = float(n)  # |H_vec| of a minimal hypersurface of the unit sphere
    c1 = n * c0 + c_h * math.sqrt(c0)
    bounds = (
        C_V * eps,
        8.0 * 108.0**N * c0 * C_V * eps,
        (c1 + 8.0 * 108.0**N * c0) * C_V * eps,
    )
    seeds = np.random.SeedSequence(seed).spawn(3)

    area = stratified_integral(
        M,
        lambda U, X: (field.value(X) < 1.0 - 1e-12).astype(float),
        chart_index=chart_index, strata=strata, samples_per_cell=samples_per_cell,
        seed=seeds[0],
    )
    grad = stratified_integral(
        M,
        lambda U, X: tangential_gradient_sq(M, chart_index, U, field.ambient_gradient(X)),
        chart_index=chart_index, strata=strata, samples_per_cell=samples_per_cell,
        seed=seeds[1],
    )
    lap = stratified_integral(
        M,
        lambda U, X: np.abs(surface_laplacian_of_cutoff(M, chart_index, U, X, field)),
        chart_index=chart_index, strata=strata, samples_per_cell=samples_per_cell,
        seed=seeds[2],
    )
    report = MRQualityReport(area, grad, lap, bounds, eps, C_V, c0, c1, N)
    for est, bnd, name in zip((area, grad, lap), bounds, ("area", "grad", "lap")):
        if est.stderr > 0.1 * bnd:
            raise InsufficientSamples(f"{name} stderr {est.stderr:.3g} > 10% of {bnd:.3g}")
    if not report.passed:
        raise BoundViolation("a measured cutoff-quality integral exceeds its bound")
    return report


# ---------------------------------------------------------------------------
# integration by parts across the covered set
# ---------------------------------------------------------------------------

def _field_laplacian(M, chart_index, U, f):
    lap = f.laplacian(M, chart_index, U)
    if lap is not None:
        return lap
    from .spectrum import surface_laplacian_fd

    return surface_laplacian_fd(M, chart_index, U, lambda pts: f.value(M, chart_index, pts))


def _field_grad_inner(M, chart_index, U, f, g):
    from .fields import grad_inner

    try:
        return grad_inner(M, chart_index, U, f, g)
    except (AttributeError, UnsupportedFamily):
        pass
    chart = M.charts[chart_index]
    gdiag = chart.metric_diag(np.asarray(U, dtype=float))
    out = np.zeros(len(U))
    h = 1e-5
    for a in range(chart.dim):
        e = np.zeros(chart.dim)
        e[a] = h
        df = (f.value(M, chart_index, U + e) - f.value(M, chart_index, U - e)) / (2 * h)
        dg = (g.value(M, chart_index, U + e) - g.value(M, chart_index, U - e)) / (2 * h)
        out += df * dg / gdiag[:, a]
    return out


def _field_chart_gradient(M, chart_index, U, f, h=1e-5):
    try:
        return f.chart_gradient(M, chart_index, U)
    except AttributeError:
        chart = M.charts[chart_index]
        cols = []
        for a in range(chart.dim):
            e = np.zeros(chart.dim)
            e[a] = h
            cols.append(
                (f.value(M, chart_index, U + e) - f.value(M, chart_index, U - e)) / (2 * h)
            )
        return np.stack(cols, axis=-1)


def ibp_residual(
    M: ParametrizedHypersurface,
    cover: BallCover,
    u,
    v,
    q=None,
    resolution=128,
    n_angular=128,
    nodes_per_segment=24,
    chart_index=0,
) -> float:
    """| int phi u Delta v + int phi <grad u, grad v> + int u <grad v, grad phi> |.

    The identity holds exactly in the continuum for any Lipschitz cutoff on
    a closed surface, so the returned number measures quadrature error plus
    the cutoff cross terms' cancellation quality.  The smooth global parts
    are integrated on the full chart; everything supported near the cover
    (the (1 - phi) corrections and the grad-phi term) uses deterministic
    local polar patches, partitioned by the active ball.
    """
    from .geometry import chart_quadrature, sqrt_det_metric

    if q is not None and cover.size and q != cover.exponent:
        raise PreconditionViolated(
            f"cover was budgeted at exponent {cover.exponent}, not {q}"
        )
    field = build_inf_cutoff(cover)
    chart = M.charts[chart_index]
    nodes, weights = chart_quadrature(chart, resolution)
    w = weights * sqrt_det_metric(chart, nodes)
    u_vals = np.asarray(u.value(M, chart_index, nodes), dtype=float)
    lap_v = _field_laplacian(M, chart_index, nodes, v)
    inner = _field_grad_inner(M, chart_index, nodes, u, v)
    total = float(w @ (u_vals * lap_v + inner))

    for i in range(cover.size):
        reach = 2.0 * cover.radii[i]
        breaks = (cover.radii[i], 2.0 * cover.radii[i])

        def correction(U, X, i=i):
            act = field.active_index(X)
            phi = field.value(X)
            uu = np.asarray(u.value(M, chart_index, U), dtype=float)
            lap = _field_laplacian(M, chart_index, U, v)
            inn = _field_grad_inner(M, chart_index, U, u, v)
            dv = _field_chart_gradient(M, chart_index, U, v)
            dphi = np.einsum(
                "pia,pi->pa", chart.jacobian(U), field.ambient_gradient(X), optimize=True
            )
            gdiag = chart.metric_diag(U)
            cross = uu * np.sum(dv * dphi / gdiag, axis=-1)
            return np.where(act == i, -(1.0 - phi) * (uu * lap + inn) + cross, 0.0)

        total += local_polar_integral(
            M,
            cover.centers[i],
            correction,
            reach,
            breaks=breaks,
            chart_index=chart_index,
            n_angular=n_angular,
            nodes_per_segment=nodes_per_segment,
            reach_metric=cover.metric if cover.metric == "euclidean" else "geodesic",
        )
    return abs(total)


def cutoff_cross_term(
    M: ParametrizedHypersurface,
    field: CutoffField,
    u,
    n_angular=128,
    nodes_per_segment=24,
    chart_index=0,
) -> float:
    """int_M |u| |grad_M phi| by local patches (the vanishing cross term)."""
    cover = field.cover
    chart = M.charts[chart_index]
    total = 0.0
    for i in range(cover.size):
        reach = 2.0 * cover.radii[i] if field.kind == "inf" else cover.radii[i]
        breaks = (
            (cover.radii[i], 2.0 * cover.radii[i])
            if field.kind == "inf"
            else (cover.radii[i] / 2.0, cover.radii[i])
        )

        def integrand(U, X, i=i):
            if field.kind == "inf":
                mask = field.active_index(X) == i
            else:
                # partition supp(grad phi) by the first annulus containing the point
                d = _cover_distance(cover.metric)(X[:, None, :], cover.centers[None])
                in_ann = (d > cover.radii[None] / 2.0) & (d < cover.radii[None])
                first = np.where(in_ann.any(axis=1), in_ann.argmax(axis=1), -1)
                mask = first == i
            uu = np.abs(np.asarray(u.value(M, chart_index, U), dtype=float))
            gsq = tangential_gradient_sq(M, chart_index, U, field.ambient_gradient(X))
            return np.where(mask, uu * np.sqrt(gsq), 0.0)

        total += local_polar_integral(
            M,
            cover.centers[i],
            integrand,
            reach,
            breaks=breaks,
            chart_index=chart_index,
            n_angular=n_angular,
            nodes_per_segment=nodes_per_segment,
            reach_metric=cover.metric if cover.metric == "euclidean" else "geodesic",
        )
    return total
