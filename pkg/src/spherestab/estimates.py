"""Numeric and algebraic forms of the curvature integral estimates.

Three families of checks live here.

* ``local_A_bound``: on any of the built-in minimal surfaces, the curvature
  energy in a ball obeys ``int_{M cap B_r(p)} |A|^2 <= C r^(n-2)`` with the
  explicit constant assembled from the stability-inequality proof,
  ``2 * 2^(n+2) C_V r^(n-2) + alpha * 2^n C_V r^n`` where
  ``alpha = |-lambda_1 - n|``.  Reports carry the measured left side, the
  bound and the margin, so the looseness of the constant stays visible.

* ``ssy_constants`` / ``l4_identity_check``: the absorption coefficient
  ``(1 + a) / (1 + 2/n - a)`` of the L^2-to-L^4 upgrade is admissible
  exactly for a < 1/n, and on the product families the equality
  ``int |A|^4 = n int |A|^2`` holds (|A|^2 is the constant n there).

* ``cone_stability_table``: a cone over a link M^n is stable iff
  ``lambda_1(M) >= -(n+1)^2/4``; combined with the link bound -2n this
  allows stable non-flat cones first at n = 6, i.e. ambient dimension 8.
  The verdict reduces to the integer inequality n^2 - 6n + 1 >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InsufficientSamples, UnsupportedFamily
from .geometry import (
    ParametrizedHypersurface,
    area,
    geodesic_distance,
    measure_volume_growth,
)
from .sampling import stratified_integral, volume_growth_sampled


@dataclass
class EstimateReport:
    """One verified inequality: measured left side against its bound."""

    name: str
    lhs: float
    rhs: float
    stderr: float = 0.0
    params: dict = field(default_factory=dict)

    @property
    def margin(self):
        return self.rhs - self.lhs

    @property
    def passed(self):
        return self.margin >= -3.0 * self.stderr

    def row(self):
        return {
            "name": self.name,
            "n": self.params.get("n"),
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "stderr": self.stderr,
        }


def default_volume_growth(M, metric="geodesic", seed=0):
    """C_V by quadrature for n <= 3 charts, by weighted sampling above."""
    if max(chart.dim for chart in M.charts) <= 3:
        return measure_volume_growth(M, metric=metric, seed=seed)
    return volume_growth_sampled(M, metric=metric, seed=seed)


def local_A_bound(
    M: ParametrizedHypersurface,
    p,
    r,
    lambda1,
    C_V=None,
    strata=None,
    samples_per_cell=3,
    seed=0,
) -> EstimateReport:
    """Measured int_{M cap B_r(p)} |A|^2 against 2^(n+3) C_V r^(n-2) (+ alpha term).

    ``p`` is an ambient point, ``r`` a geodesic radius in (0, 2) and
    ``lambda1`` the first stability eigenvalue that feeds
    ``alpha = |-lambda_1 - n|``.
    """
    if not 0.0 < r < 2.0:
        raise ValueError("radius must lie in (0, 2)")
    n = M.dimension
    alpha = abs(-lambda1 - n)
    if C_V is None:
        C_V = default_volume_growth(M, seed=seed)
    if strata is None:
        strata = {1: 512, 2: 72, 3: 20, 4: 9, 5: 6, 6: 5}.get(n, 4)
    p = np.asarray(p, dtype=float)

    if not M.has_closed_form:
        raise UnsupportedFamily("curvature-energy measurement needs closed-form |A|^2")

    def integrand(U, X):
        a2 = M.shape_batch(0, U)[4]
        return np.where(geodesic_distance(X, p) <= r, a2, 0.0)

    est = stratified_integral(
        M, integrand, strata=strata, samples_per_cell=samples_per_cell, seed=seed
    )
    rhs = 2.0 * 2.0 ** (n + 2) * C_V * r ** (n - 2) + alpha * 2.0**n * C_V * r**n
    if est.stderr > 0.1 * rhs:
        raise InsufficientSamples(f"stderr {est.stderr:.3g} > 10% of bound {rhs:.3g}")
    return EstimateReport(
        "local_A_bound",
        est.value,
        rhs,
        est.stderr,
        {"n": n, "r": r, "alpha": alpha, "C_V": C_V, "lambda1": lambda1},
    )


@dataclass
class SSYConstants:
    """Absorption constants of the L^2 -> L^4 curvature upgrade."""

    coefficient: float          # (1 + a) / (1 + 2/n - a)
    admissible: bool            # coefficient < 1, i.e. a < 1/n
    absorbed: Optional[float]   # C(n, a, alpha) once the left side absorbs

    def __iter__(self):
        return iter((self.coefficient, self.admissible))


def ssy_constants(n, a, alpha=0.0) -> SSYConstants:
    """Coefficient (1+a)/(1+2/n-a) and its admissibility (a < 1/n, strictly).

    When admissible, also the absorbed constant C with
    ``int |A|^4 f^2 <= C int |A|^2 (f^2 + |grad f|^2)``, namely
    ``max((1+a)/(a (1+2/n-a)) + 1 + 1/a, alpha) / (1 - coefficient)``.
    """
    if a <= 0:
        raise ValueError("a must be positive")
    coefficient = (1.0 + a) / (1.0 + 2.0 / n - a)
    admissible = a < 1.0 / n
    absorbed = None
    if admissible:
        grad_coef = (1.0 + a) / (a * (1.0 + 2.0 / n - a)) + 1.0 + 1.0 / a
        absorbed = max(grad_coef, alpha) / (1.0 - coefficient)
    return SSYConstants(coefficient, admissible, absorbed)


def l4_identity_check(M: ParametrizedHypersurface, resolution=96) -> EstimateReport:
    """int |A|^4 == n int |A|^2 on the product families (both sides by quadrature).

    |A|^2 is constant there, so the identity is exact up to quadrature
    rounding; the report's lhs/rhs are the two integrals.
    """
    if M.family not in ("equator", "clifford"):
        raise UnsupportedFamily("identity is verified on the built-in families")
    n = M.dimension
    from .geometry import sample_points

    _, U, _ = sample_points(M, 64, seed=0)
    a2 = M.shape_batch(0, U)[4]
    if np.ptp(a2) > 1e-12:
        raise UnsupportedFamily("|A|^2 is not constant; no closed-form identity")
    const = float(a2[0])
    total = area(M, resolution)
    lhs = const**2 * total
    rhs = n * const * total
    return EstimateReport(
        "l4_identity", lhs, rhs, 0.0, {"n": n, "normA2": const, "area": total}
    )


@dataclass
class ConeVerdict:
    """Stability verdict for the cone over a link of dimension n."""

    n: int
    link_bound: float       # -2n, the sharp first-eigenvalue bound on the link
    threshold: float        # -(n+1)^2 / 4, the cone stability criterion
    stable_possible: bool   # -2n >= -(n+1)^2/4, exact integer arithmetic

    @property
    def margin(self):
        return self.link_bound - self.threshold


def cone_stability_table(n_max) -> list:
    """Verdicts for n = 1..n_max; the first True row is n = 6 (cone in R^8)."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    out = []
    for n in range(1, n_max + 1):
        stable = 8 * n <= (n + 1) ** 2   # -2n >= -(n+1)^2/4 in integers
        out.append(ConeVerdict(n, -2.0 * n, -((n + 1) ** 2) / 4.0, stable))
    return out


def reports_to_csv(reports) -> str:
    """CSV text for a list of EstimateReport rows (name, n, lhs, rhs, margin, stderr)."""
    lines = ["name,n,lhs,rhs,margin,stderr"]
    for rep in reports:
        row = rep.row()
        lines.append(
            "%s,%s,%r,%r,%r,%r"
            % (row["name"], row["n"], row["lhs"], row["rhs"], row["margin"], row["stderr"])
        )
    return "\n".join(lines) + "\n"
