"""Discrete and analytic stability operators on chart grids.

The stability operator of a minimal hypersurface M^n of the unit sphere is
``L = Delta_M + |A|^2 + n`` (the ambient Ricci curvature of S^(n+1) is the
constant n).  With the sign convention ``L u = -lambda u``, its spectrum is
computed here from the generalized pencil

    (S - V) x = lambda B x,

where S is the weak-form stiffness matrix (Dirichlet energy), B the lumped
mass matrix and V the potential ``(|A|^2 + n)`` weighted by the mass.  The
discretization is second-order finite volumes in chart coordinates with
metric-density weights: one node per cell, periodic axes wrap, and polar
axes need no boundary rows because the density ``sqrt(det g)`` vanishes at
the poles (the flux through a pole is zero).  By construction S is
symmetric positive semidefinite with the constant vector in its kernel, so
on a surface with constant potential the constant function is an exact
discrete eigenvector -- mirroring the continuous situation.

An analytic backend covers the closed-form families: round spheres
(eigenvalues j(j+n-1)/r^2 with the usual multiplicities), the flat product
torus (2(j^2+m^2) over integer pairs) and, restricted to axisymmetric
modes, general products of spheres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyFailure, DegenerateChart, UnsupportedFamily
from .geometry import ParametrizedHypersurface, _per_axis


@dataclass
class DiscreteOperator:
    """Assembled weak-form matrices of the stability pencil on one chart grid."""

    stiffness: sp.csr_matrix
    mass: sp.csr_matrix            # diagonal, positive
    potential: sp.csr_matrix       # diagonal, (|A|^2 + n) mass-weighted
    dimension: int
    resolution: list
    periodic: tuple
    nodes: np.ndarray              # (m, n) chart coordinates of the grid nodes
    surface: str = "custom"

    @property
    def size(self):
        return self.stiffness.shape[0]

    def pencil(self):
        """(S - V, B) of the generalized eigenproblem."""
        return (self.stiffness - self.potential).tocsc(), self.mass

    def export_coo(self, which="stiffness", path=None):
        """Matrix in text triplet form, one ``row col value`` line per entry."""
        mat = getattr(self, which).tocoo()
        order = np.lexsort((mat.col, mat.row))
        lines = [
            f"{mat.row[i]} {mat.col[i]} {float(mat.data[i])!r}"
            for i in order
            if mat.data[i] != 0.0
        ]
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def grid_axes(chart, resolution):
    """Node coordinates and spacing per axis: uniform (periodic) or cell-centered."""
    res = _per_axis(resolution, chart.dim)
    axes = []
    for a, count in enumerate(res):
        lo, hi = chart.box[a]
        h = (hi - lo) / count
        offset = 0.0 if chart.periodic[a] else 0.5
        axes.append((lo + (np.arange(count) + offset) * h, h))
    return axes


def assemble_jacobi(M: ParametrizedHypersurface, resolution) -> DiscreteOperator:
    """Assemble the stability pencil of M on a tensor grid.

    Requires a single chart with diagonal (orthogonal-coordinate) metric,
    which covers every built-in family.  ``resolution`` is the node count
    per axis (scalar or list), at least 8.
    """
    if len(M.charts) != 1:
        raise AssemblyFailure("assembly supports single-chart surfaces")
    chart = M.charts[0]
    if chart.metric_diag is None:
        raise AssemblyFailure("assembly needs an analytic diagonal metric (orthogonal chart)")
    res = _per_axis(resolution, chart.dim)
    if min(res) < 8:
        raise ValueError("resolution must be >= 8 per axis")

    axes = grid_axes(chart, resolution)
    shapes = [len(ax[0]) for ax in axes]
    n_nodes = int(np.prod(shapes))
    idx = np.arange(n_nodes).reshape(shapes)
    mesh = np.meshgrid(*[ax[0] for ax in axes], indexing="ij")
    nodes = np.stack([g.ravel() for g in mesh], axis=-1)
    cell = float(np.prod([ax[1] for ax in axes]))

    gdiag = chart.metric_diag(nodes)
    if np.any(gdiag <= 0):
        raise DegenerateChart("metric degenerates at a grid node")
    sqrtg = np.prod(gdiag, axis=-1) ** 0.5
    mass = sqrtg * cell
    if np.any(mass <= 0):
        raise AssemblyFailure("mass matrix is not positive definite")

    a2 = M.shape_batch(0, nodes)[4] if M.has_closed_form else _a2_slow(M, nodes)
    pot = (a2 + M.dimension) * mass

    rows, cols, vals = [], [], []
    ndim = chart.dim
    for a in range(ndim):
        coords, h = axes[a]
        mids = coords + h / 2.0
        if not chart.periodic[a]:
            mids = mids[:-1]  # no flux through the vanishing-density box ends
        for e in range(len(mids)):
            lo_sel = [slice(None)] * ndim
            hi_sel = [slice(None)] * ndim
            lo_sel[a], hi_sel[a] = e, (e + 1) % shapes[a]
            pts = [g[tuple(lo_sel)] for g in mesh]
            pts[a] = np.full_like(pts[a], mids[e])
            pts = np.stack([p.ravel() for p in pts], axis=-1)
            gd = chart.metric_diag(pts)
            w = np.prod(gd, axis=-1) ** 0.5 / gd[:, a] * cell / h**2
            ii = idx[tuple(lo_sel)].ravel()
            jj = idx[tuple(hi_sel)].ravel()
            rows += [ii, jj, ii, jj]
            cols += [ii, jj, jj, ii]
            vals += [w, w, -w, -w]
    S = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_nodes, n_nodes),
    )
    S.sum_duplicates()
    return DiscreteOperator(
        stiffness=S,
        mass=sp.diags(mass).tocsr(),
        potential=sp.diags(pot).tocsr(),
        dimension=M.dimension,
        resolution=res,
        periodic=chart.periodic,
        nodes=nodes,
        surface=M.family + str(M.params),
    )


def _a2_slow(M, nodes):
    from .geometry import shape_at

    return np.array([shape_at(M, 0, u).norm_A_sq for u in nodes])


# ---------------------------------------------------------------------------
# analytic backend
# ---------------------------------------------------------------------------

@dataclass
class AnalyticSpectrum:
    """Exact -Delta eigenvalues of a closed-form family plus its constant potential."""

    family: str
    params: tuple
    potential: float               # |A|^2 + n, exact for these families
    dimension: int
    axisymmetric: bool = False
    _values: list = field(default_factory=list, repr=False)

    def eigenvalues(self, count):
        """First ``count`` eigenvalues of -Delta, sorted, multiplicity-expanded."""
        while len(self._values) < count:
            self._extend(count)
        return np.array(self._values[:count], dtype=float)

    def _extend(self, count):
        fam, par = self.family, self.params
        if fam == "equator":
            vals = _sphere_spectrum(par[0], Fraction(1), count)
        elif fam == "clifford" and par == (1, 1):
            vals = _torus_spectrum(count)
        elif fam == "clifford":
            vals = _zonal_product_spectrum(par[0], par[1], count)
        else:  # pragma: no cover - constructor forbids this
            raise UnsupportedFamily(fam)
        self._values = sorted(vals)[: max(count, len(self._values))]


def _sphere_spectrum(n, r_sq, count):
    """j(j+n-1)/r^2 with multiplicity C(n+j, n) - C(n+j-2, n) on S^n(r)."""
    vals = []
    j = 0
    while len(vals) < count:
        mult = math.comb(n + j, n) - (math.comb(n + j - 2, n) if j >= 2 else 0)
        vals += [float(Fraction(j * (j + n - 1)) / r_sq)] * mult
        j += 1
    return vals


def _torus_spectrum(count):
    """2(j^2 + m^2) over integer pairs for the flat Clifford torus."""
    J = int(math.isqrt(count)) + 2
    vals = [2.0 * (j * j + m * m) for j in range(-J, J + 1) for m in range(-J, J + 1)]
    return sorted(vals)[:count]


def _zonal_product_spectrum(k, l, count):
    """Axisymmetric modes of S^k(sqrt(k/n)) x S^l(sqrt(l/n)): zonal sums."""
    n = k + l
    J = count + 1
    vals = []
    for j in range(J):
        for m in range(J):
            v = Fraction(j * (j + k - 1) * n, k) + Fraction(m * (m + l - 1) * n, l)
            vals.append(float(v))
    return sorted(vals)[:count]


def analytic_laplace_spectrum(M: ParametrizedHypersurface, axisymmetric=False) -> AnalyticSpectrum:
    """Exact -Delta spectrum enumerator for a built-in family.

    Supported: any equator, the (1, 1) product torus, and general (k, l)
    products restricted to axisymmetric modes (pass ``axisymmetric=True``).
    """
    if M.family == "equator":
        n = M.params[0]
        return AnalyticSpectrum("equator", (n,), float(n), n)
    if M.family == "clifford":
        k, l = M.params
        if (k, l) != (1, 1) and not axisymmetric:
            raise UnsupportedFamily(
                f"clifford{(k, l)} has no full analytic enumeration; "
                "restrict to axisymmetric modes or use the numeric backend"
            )
        n = k + l
        return AnalyticSpectrum("clifford", (k, l), float(2 * n), n, axisymmetric=(k, l) != (1, 1))
    raise UnsupportedFamily(f"no analytic spectrum for family {M.family!r}")
