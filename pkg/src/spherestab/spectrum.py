"""First stability eigenvalues, Rayleigh quotients and curvature identities.

The first stability eigenvalue is

    lambda_1 = inf_f  ( int |grad f|^2 - (|A|^2 + n) f^2 )  /  int f^2,

the infimum of the stability Rayleigh quotient.  Benchmarks verified here:
equators attain lambda_1 = -n with the constant eigenfunction; the minimal
products of spheres attain lambda_1 = -2n, again with constant first
eigenfunction, and |A| = sqrt(n) is the natural test field that exhibits
the value.  The pointwise identity

    Delta |A|^2 = 2 |grad A|^2 + 2 n |A|^2 - 2 |A|^4

and its consequence ``|A| Delta |A| >= (2/n) |grad |A||^2 + n |A|^2 - |A|^4``
hold on every minimal hypersurface of the sphere and are checked by finite
differences with covariant (Christoffel) corrections.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .errors import NonMinimal, UnsupportedFamily, ZeroTestFunction
from .fields import ConstantField, ShapeNormField, SurfaceField
from .geometry import ParametrizedHypersurface, chart_quadrature, sqrt_det_metric
from .operators import AnalyticSpectrum, DiscreteOperator, assemble_jacobi

EIG_TOL = 1e-10
EIG_MAXITER = 10_000


@dataclass
class EigenResult:
    """Smallest stability eigenvalue with its eigenvector and solve diagnostics."""

    lambda1: float
    eigenvector: Optional[np.ndarray]   # B-normalized, first nonzero entry positive
    residual: float                     # ||(S-V)x - lambda B x|| / ||B x||
    backend: str                        # "analytic" | "numeric"
    converged: bool = True

    def record(self, surface, resolution=None):
        return {
            "surface": surface,
            "backend": self.backend,
            "resolution": resolution,
            "lambda1": self.lambda1,
            "residual": self.residual,
        }


def first_stability_eigenvalue(op: Union[DiscreteOperator, AnalyticSpectrum]) -> EigenResult:
    """Smallest eigenvalue of the stability pencil.

    Numeric operators are solved by shift-invert Lanczos with the shift
    sigma = -(2n + 1), safely below the target window [-2n, -n], and the
    deterministic all-ones start vector so the constant mode on the
    product families is found immediately.  The analytic backend minimizes
    (enumerated -Delta eigenvalue) - (|A|^2 + n) exactly.
    """
    if isinstance(op, AnalyticSpectrum):
        lam = float(np.min(op.eigenvalues(8)) - op.potential)
        return EigenResult(lam, None, 0.0, "analytic")

    A, B = op.pencil()
    sigma = -(2.0 * op.dimension + 1.0)
    v0 = np.ones(op.size)
    try:
        vals, vecs = eigsh(
            A, k=1, M=B, sigma=sigma, which="LM", v0=v0, tol=EIG_TOL, maxiter=EIG_MAXITER
        )
        converged = True
    except ArpackNoConvergence as exc:  # report what we have; caller decides
        if len(exc.eigenvalues) == 0:
            raise
        vals, vecs = exc.eigenvalues, exc.eigenvectors
        converged = False
    lam = float(vals[0])
    x = vecs[:, 0]
    x = x / np.sqrt(float(x @ (B @ x)))
    nz = np.flatnonzero(np.abs(x) > 1e-12 * np.abs(x).max())
    if x[nz[0]] < 0:
        x = -x
    Bx = B @ x
    residual = float(np.linalg.norm(A @ x - lam * Bx) / np.linalg.norm(Bx))
    return EigenResult(lam, x, residual, "numeric", converged)


def rayleigh_quotient(
    M: ParametrizedHypersurface,
    f: SurfaceField,
    resolution=48,
    method="auto",
) -> float:
    """Stability Rayleigh quotient of a test field.

    ``method="operator"`` evaluates x^T (S - V) x / x^T B x on the assembled
    grid (so the value is always >= the numeric lambda_1 of that grid);
    ``method="quadrature"`` integrates |grad f|^2 - (|A|^2 + n) f^2 with the
    chart quadrature, using the field's analytic gradient when it has one
    and central differences otherwise.  ``"auto"`` picks quadrature when an
    analytic gradient exists, otherwise the operator path.
    """
    if method == "auto":
        probe = f.gradient_sq(M, 0, M.charts[0].sample_box().mean(axis=1)[None, :])
        method = "quadrature" if probe is not None else "operator"

    if method == "operator":
        op = assemble_jacobi(M, resolution)
        x = np.asarray(f.value(M, 0, op.nodes), dtype=float)
        B = op.mass
        denom = float(x @ (B @ x))
        if denom <= 1e-28 * B.diagonal().sum():
            raise ZeroTestFunction("test field vanishes identically on the grid")
        num = float(x @ (op.stiffness @ x) - x @ (op.potential @ x))
        return num / denom

    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")

    num = 0.0
    denom = 0.0
    scale = 0.0
    for c, chart in enumerate(M.charts):
        if chart.dim <= 3:
            nodes, weights = chart_quadrature(chart, resolution)
            w = weights * sqrt_det_metric(chart, nodes)
        else:
            # high-dimensional charts: sampled quadrature with density weights
            from .geometry import sample_points

            _, nodes, _ = sample_points(M, max(2000, resolution), seed=0)
            w = sqrt_det_metric(chart, nodes)
        vals = np.asarray(f.value(M, c, nodes), dtype=float)
        grads = f.gradient_sq(M, c, nodes)
        if grads is None:
            grads = _fd_gradient_sq(M, c, nodes, f)
        a2 = M.shape_batch(c, nodes)[4] if M.has_closed_form else _a2_of(M, c, nodes)
        num += float(w @ (grads - (a2 + M.dimension) * vals**2))
        denom += float(w @ vals**2)
        scale += float(w.sum())
    if denom <= 1e-28 * scale:
        raise ZeroTestFunction("test field vanishes identically at the quadrature nodes")
    return num / denom


def _fd_gradient_sq(M, c, nodes, f, h=1e-5):
    chart = M.charts[c]
    if chart.metric_diag is None:
        raise UnsupportedFamily("finite-difference gradients need an analytic metric")
    gdiag = chart.metric_diag(nodes)
    out = np.zeros(nodes.shape[0])
    for a in range(chart.dim):
        e = np.zeros(chart.dim)
        e[a] = h
        df = (f.value(M, c, nodes + e) - f.value(M, c, nodes - e)) / (2 * h)
        out += df * df / gdiag[:, a]
    return out


def _a2_of(M, c, nodes):
    from .geometry import shape_at

    return np.array([shape_at(M, c, u).norm_A_sq for u in nodes])


def test_function_A(M: ParametrizedHypersurface) -> SurfaceField:
    """The |A| test field; constant sqrt(n) on the product families, zero on equators."""
    if M.family == "equator":
        return ConstantField(0.0)
    if M.family == "clifford":
        return ConstantField(float(np.sqrt(M.dimension)))
    return ShapeNormField()


# ---------------------------------------------------------------------------
# curvature identity checks
# ---------------------------------------------------------------------------

@dataclass
class SimonsReport:
    """Pointwise residuals of the curvature identity and its inequality form."""

    max_identity_residual: float
    max_inequality_violation: float
    sample_count: int
    step: float


def christoffel_fd(M: ParametrizedHypersurface, chart_index, U, step=2e-3):
    """Christoffel symbols from central differences of the (diagonal) metric.

    Returns (gdiag, ginv_diag, gamma) with gamma[:, d, c, a] = Gamma^d_{ca}.
    """
    chart = M.charts[chart_index]
    if chart.metric_diag is None:
        raise UnsupportedFamily("covariant stencils need an analytic diagonal metric")
    U = np.asarray(U, dtype=float)
    m, n = U.shape
    gdiag = chart.metric_diag(U)
    dg = np.empty((m, n, n, n))       # dg[:, c, a, b] = d_c g_ab
    for c in range(n):
        e = np.zeros(n)
        e[c] = step
        dg[:, c] = (
            _diag_to_full(chart.metric_diag(U + e)) - _diag_to_full(chart.metric_diag(U - e))
        ) / (2 * step)
    ginv = 1.0 / gdiag
    # gamma[:, d, c, a] = Gamma^d_{ca} = 1/2 g^{dd} (d_c g_da + d_a g_dc - d_d g_ca)
    gamma = np.empty((m, n, n, n))
    for d in range(n):
        gamma[:, d] = 0.5 * ginv[:, d, None, None] * (
            dg[:, :, d, :] + dg[:, :, :, d].transpose(0, 2, 1) - dg[:, d, :, :]
        )
    return gdiag, ginv, gamma


def surface_laplacian_fd(M, chart_index, U, fn, step=2e-3, parts=None):
    """Laplace-Beltrami of a chart-parameter callable by central differences.

    ``Delta f = g^{cc} (d^2_cc f - Gamma^e_{cc} d_e f)`` on the diagonal-metric
    charts of the built-in families.  ``parts`` may carry a precomputed
    (gdiag, ginv, gamma) triple from :func:`christoffel_fd`.
    """
    U = np.asarray(U, dtype=float)
    m, n = U.shape
    _, ginv, gamma = parts if parts is not None else christoffel_fd(M, chart_index, U, step)
    f0 = fn(U)
    df = np.empty((m, n))
    ddf = np.empty((m, n))
    for c in range(n):
        e = np.zeros(n)
        e[c] = step
        fp, fm = fn(U + e), fn(U - e)
        df[:, c] = (fp - fm) / (2 * step)
        ddf[:, c] = (fp - 2 * f0 + fm) / step**2
    corr = np.einsum("mc,mecc->me", ginv, gamma, optimize=True)
    return np.einsum("mc,mc->m", ginv, ddf) - np.einsum("me,me->m", corr, df)


def surface_gradient_sq_fd(M, chart_index, U, fn, step=2e-3):
    """|grad f|^2 = g^{cc} (d_c f)^2 by central differences (diagonal metric)."""
    U = np.asarray(U, dtype=float)
    m, n = U.shape
    gdiag = M.charts[chart_index].metric_diag(U)
    out = np.zeros(m)
    for c in range(n):
        e = np.zeros(n)
        e[c] = step
        df = (fn(U + e) - fn(U - e)) / (2 * step)
        out += df * df / gdiag[:, c]
    return out


def simons_check(M: ParametrizedHypersurface, samples=200, seed=0, step=2e-3) -> SimonsReport:
    """Check Delta|A|^2 = 2|grad A|^2 + 2n|A|^2 - 2|A|^4 at sampled points.

    Derivatives of A use central differences of its chart components with
    Christoffel corrections (Christoffels themselves from differences of the
    metric); Laplacians of |A|^2 and |A| use the same stencils.  The
    inequality form is scored one-sidedly as max(0, RHS - LHS).

    Raises :class:`NonMinimal` if |H| > 1e-6 at any sample: the identity is
    only claimed for minimal surfaces.
    """
    if not M.has_closed_form:
        raise UnsupportedFamily("identity check needs the closed-form geometry backend")
    from .geometry import sample_points

    n = M.dimension
    _, U, _ = sample_points(M, samples, seed=seed, pad=2.0 * step)
    chart = 0
    m = U.shape[0]

    gdiag0, _, A0, H0, a2_0 = M.shape_batch(chart, U)
    if np.any(np.abs(H0) > 1e-6):
        raise NonMinimal(f"|H| up to {np.abs(H0).max():.3e} at samples; identity needs H = 0")

    parts = christoffel_fd(M, chart, U, step)
    _, ginv, gamma = parts
    dA = np.empty((m, n, n, n))       # dA[:, c, a, b] = d_c A_ab
    for c in range(n):
        e = np.zeros(n)
        e[c] = step
        dA[:, c] = (M.shape_batch(chart, U + e)[2] - M.shape_batch(chart, U - e)[2]) / (2 * step)
    # nabla_c A_ab = d_c A_ab - Gamma^d_{ca} A_db - Gamma^d_{cb} A_ad
    nabla = (
        dA
        - np.einsum("mdca,mdb->mcab", gamma, A0, optimize=True)
        - np.einsum("mdcb,mad->mcab", gamma, A0, optimize=True)
    )
    grad_A_sq = np.einsum(
        "mc,ma,mb,mcab,mcab->m", ginv, ginv, ginv, nabla, nabla, optimize=True
    )

    a2_fn = lambda pts: M.shape_batch(chart, pts)[4]
    norm_fn = lambda pts: np.sqrt(M.shape_batch(chart, pts)[4])
    lap_a2 = surface_laplacian_fd(M, chart, U, a2_fn, step, parts=parts)
    lap_norm = surface_laplacian_fd(M, chart, U, norm_fn, step, parts=parts)
    grad_norm_sq = surface_gradient_sq_fd(M, chart, U, norm_fn, step)
    normA0 = np.sqrt(a2_0)

    identity = np.abs(lap_a2 - (2 * grad_A_sq + 2 * n * a2_0 - 2 * a2_0**2))
    rhs9 = (2.0 / n) * grad_norm_sq + n * a2_0 - a2_0**2
    lhs9 = normA0 * lap_norm
    violation = np.maximum(0.0, rhs9 - lhs9)
    return SimonsReport(float(identity.max()), float(violation.max()), m, step)


def _diag_to_full(gdiag):
    n = gdiag.shape[-1]
    out = np.zeros(gdiag.shape + (n,))
    idx = np.arange(n)
    out[..., idx, idx] = gdiag
    return out


def simons_refinement(M, steps=(0.08, 0.04, 0.02), samples=100, seed=0):
    """Identity residual at decreasing difference steps (for observed-order checks)."""
    return [simons_check(M, samples=samples, seed=seed, step=h).max_identity_residual for h in steps]


def observed_order(errors, floor=1e-9):
    """Least log2 ratio of successive errors; inf when all sit at the solver floor.

    An error sequence already at the floor (constant eigenvectors are exact
    discrete eigenvectors, so lambda_1 carries no discretization error on
    the product families) is reported as converged beyond measurement.
    """
    errors = [abs(e) for e in errors]
    if max(errors) < floor:
        return float("inf")
    rates = []
    for a, b in zip(errors, errors[1:]):
        if b < floor and a < floor:
            continue
        rates.append(np.log2(max(a, floor) / max(b, floor)))
    return float(min(rates)) if rates else float("inf")
