"""Scalar fields on a parametrized hypersurface.

A field knows its values at chart parameter points and, when analytically
available, its squared tangential gradient and its surface Laplacian.
Fields lacking analytic derivatives fall back to chart finite differences
where a consumer needs them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedFamily
from .geometry import ParametrizedHypersurface


class SurfaceField:
    """Base field: subclasses override ``value`` and, if they can, derivatives."""

    def value(self, M, chart_index, U):
        raise NotImplementedError

    def gradient_sq(self, M, chart_index, U):
        """|grad f|^2 at the points, or None when not analytically known."""
        return None

    def laplacian(self, M, chart_index, U):
        """Delta_M f at the points, or None when not analytically known."""
        return None


@dataclass
class ConstantField(SurfaceField):
    constant: float

    def value(self, M, chart_index, U):
        U = np.asarray(U, dtype=float)
        return np.full(U.shape[:-1], self.constant)

    def gradient_sq(self, M, chart_index, U):
        U = np.asarray(U, dtype=float)
        return np.zeros(U.shape[:-1])

    def laplacian(self, M, chart_index, U):
        U = np.asarray(U, dtype=float)
        return np.zeros(U.shape[:-1])


@dataclass
class AmbientCoordinateField(SurfaceField):
    """Restriction of a scaled ambient coordinate, f = scale * x_index.

    On the built-in minimal families these are eigenfunctions of the
    Laplacian: Delta_M x_j = -n x_j (the inclusion of a minimal hypersurface
    of the unit sphere is harmonic up to the radial tension -n x), which
    gives exact gradients and Laplacians.
    """

    index: int
    scale: float = 1.0

    def value(self, M, chart_index, U):
        return self.scale * M.embed(chart_index, U)[..., self.index]

    def chart_gradient(self, M, chart_index, U):
        chart = M.charts[chart_index]
        if chart.jacobian is None:
            raise UnsupportedFamily("coordinate field gradients need an analytic jacobian")
        return self.scale * chart.jacobian(np.asarray(U, dtype=float))[..., self.index, :]

    def gradient_sq(self, M, chart_index, U):
        chart = M.charts[chart_index]
        if chart.jacobian is None or chart.metric_diag is None:
            return None
        df = self.chart_gradient(M, chart_index, U)
        gdiag = chart.metric_diag(np.asarray(U, dtype=float))
        return np.sum(df * df / gdiag, axis=-1)

    def laplacian(self, M, chart_index, U):
        factor = M.minimal_immersion_laplacian_factor()
        return -factor * self.value(M, chart_index, U)


@dataclass
class ShapeNormField(SurfaceField):
    """|A| evaluated pointwise through :func:`spherestab.geometry.shape_at`."""

    method: str = "auto"

    def value(self, M, chart_index, U):
        from .geometry import shape_at

        U = np.asarray(U, dtype=float)
        flat = U.reshape(-1, U.shape[-1])
        vals = np.array(
            [np.sqrt(shape_at(M, chart_index, u, method=self.method).norm_A_sq) for u in flat]
        )
        return vals.reshape(U.shape[:-1])


def grad_inner(M: ParametrizedHypersurface, chart_index, U, f: SurfaceField, g: SurfaceField):
    """<grad f, grad g> for coordinate-type fields with analytic chart gradients."""
    chart = M.charts[chart_index]
    df = f.chart_gradient(M, chart_index, U)
    dg = g.chart_gradient(M, chart_index, U)
    gdiag = chart.metric_diag(np.asarray(U, dtype=float))
    return np.sum(df * dg / gdiag, axis=-1)
