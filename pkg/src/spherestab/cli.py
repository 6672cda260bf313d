"""Command-line entry point: reproducible experiments with file reports.

Subcommands
-----------
spectrum    analytic + numeric first stability eigenvalues over a resolution
            ladder, with residuals and the observed convergence order
simons      curvature-identity residuals with a step-refinement ladder
cutoff      synthetic singular set -> ball cover -> cutoff field -> measured
            gradient integral (inf kind) or quality triple (product kind)
estimates   local curvature-energy bounds plus the L^4 identity
cone-table  cone stability verdicts for links of dimension 1..n_max

Every run is deterministic for a fixed seed and writes a self-describing
report (the config is embedded) as CSV or JSON.  Config values may come
from flags or from a JSON config file; flags override the file.  The
default output directory is $SPHERESTAB_OUTDIR, falling back to the
current directory.

Exit codes: 0 all asserted bounds pass, 1 a bound failed, 2 configuration
error, 3 numerical failure (infeasible budget, insufficient samples, no
convergence).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import estimates as est
from . import cutoff as cut
from . import geometry as geo
from . import operators as ops
from . import spectrum as spec
from .errors import (
    BoundViolation,
    BudgetInfeasible,
    InsufficientSamples,
    NoConvergence,
    SpherestabError,
)

OUTDIR_ENV = "SPHERESTAB_OUTDIR"


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    family: str = "clifford"
    k: int = 1
    l: int = 1
    n: int = 2
    resolutions: list = field(default_factory=lambda: [32, 64, 128])
    epsilon: float = 0.05
    exponent: float = 1.0
    kind: str = "inf"
    points: int = 1
    singular_set: str = ""
    n_max: int = 10
    radii: list = field(default_factory=lambda: [0.1, 0.25, 0.5, 1.0])
    samples: int = 200
    seed: int = 0
    out: str = "."
    format: str = "csv"

    def validate(self):
        if self.family not in ("equator", "clifford"):
            raise ConfigError(f"unknown family {self.family!r}")
        if self.family == "clifford" and (self.k < 1 or self.l < 1):
            raise ConfigError("clifford factors k, l must be >= 1")
        if self.family == "equator" and self.n < 1:
            raise ConfigError("equator dimension n must be >= 1")
        if any(r < 8 for r in self.resolutions):
            raise ConfigError("resolutions must be >= 8")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.kind not in ("inf", "product"):
            raise ConfigError("kind must be 'inf' or 'product'")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be 'csv' or 'json'")
        return self

    def surface(self):
        if self.family == "equator":
            return geo.equator(self.n)
        return geo.clifford_hypersurface((self.k, self.l))

    def tag(self):
        if self.family == "equator":
            return f"equator_{self.n}"
        return f"clifford_{self.k}_{self.l}"


def _build_config(args) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            values.update(json.load(fh))
    for key, val in vars(args).items():
        if key in ("config", "func") or val is None:
            continue
        values[key] = val
    values.setdefault("out", os.environ.get(OUTDIR_ENV, "."))
    known = {f for f in RunConfig.__dataclass_fields__}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if (
        values.get("family", "clifford") == "clifford"
        and "n" in values
        and values.get("k", 1) + values.get("l", 1) != values["n"]
    ):
        raise ConfigError("clifford parameters must satisfy k + l = n")
    return RunConfig(**values).validate()


def _write_report(config: RunConfig, payload: dict, rows=None, columns=None) -> str:
    os.makedirs(config.out, exist_ok=True)
    stem = config.command if config.command == "cone-table" else f"{config.command}_{config.tag()}"
    path = os.path.join(config.out, f"{stem}.{config.format}")
    doc = {"config": asdict(config), **payload}
    if config.format == "json":
        text = json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n"
    else:
        lines = ["# config: " + json.dumps(asdict(config), sort_keys=True)]
        if rows is not None:
            lines.append(",".join(columns))
            for row in rows:
                lines.append(",".join(_csv_cell(row.get(c)) for c in columns))
        else:
            lines.append(json.dumps(payload, sort_keys=True))
        text = "\n".join(lines) + "\n"
    with open(path, "w") as fh:
        fh.write(text)
    return path


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not JSON serializable: {type(v)}")


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float):
        return repr(v)
    return str(v)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _run_spectrum(config: RunConfig):
    M = config.surface()
    analytic = spec.first_stability_eigenvalue(
        ops.analytic_laplace_spectrum(M, axisymmetric=M.family == "clifford" and (config.k, config.l) != (1, 1))
    )
    rows = [analytic.record(config.tag())]
    rows[-1]["abs_err"] = 0.0
    errors = []
    for res in config.resolutions:
        result = spec.first_stability_eigenvalue(ops.assemble_jacobi(M, res))
        row = result.record(config.tag(), res)
        row["abs_err"] = abs(result.lambda1 - analytic.lambda1)
        errors.append(row["abs_err"])
        rows.append(row)
        if not result.converged:
            raise NoConvergence("eigensolver did not converge", result)
    order = spec.observed_order(errors) if len(errors) >= 2 else float("inf")
    payload = {
        "rows": rows,
        "analytic_lambda1": analytic.lambda1,
        "observed_order": order if np.isfinite(order) else "inf",
    }
    columns = ["surface", "backend", "resolution", "lambda1", "residual", "abs_err"]
    path = _write_report(config, payload, rows, columns)
    ok = errors[-1] <= 1e-6 and all(r["residual"] <= 1e-8 for r in rows[1:]) and order >= 2
    print(f"spectrum {config.tag()}: lambda1 = {rows[-1]['lambda1']:.9f} "
          f"(analytic {analytic.lambda1}), err {errors[-1]:.2e}, order {order} -> {path}")
    return 0 if ok else 1


def _run_simons(config: RunConfig):
    M = config.surface()
    report = spec.simons_check(M, samples=config.samples, seed=config.seed)
    steps = (0.08, 0.04, 0.02)
    ladder = spec.simons_refinement(M, steps=steps, samples=min(config.samples, 100), seed=config.seed)
    order = spec.observed_order(ladder)
    payload = {
        "identity_residual": report.max_identity_residual,
        "inequality_violation": report.max_inequality_violation,
        "samples": report.sample_count,
        "steps": list(steps),
        "step_residuals": ladder,
        "observed_order": order if np.isfinite(order) else "inf",
    }
    path = _write_report(config, payload)
    ok = (
        report.max_identity_residual <= 1e-6
        and report.max_inequality_violation == 0.0
        and order >= 2
    )
    print(f"simons {config.tag()}: residual {report.max_identity_residual:.2e}, "
          f"violation {report.max_inequality_violation}, order {order} -> {path}")
    return 0 if ok else 1


def _run_cutoff(config: RunConfig):
    M = config.surface()
    n = M.dimension
    if config.singular_set:
        pts = cut.load_point_cloud(config.singular_set)
        if pts.size and pts.shape[1] != n + 2:
            raise ConfigError(
                f"singular-set points need {n + 2} coordinates, got {pts.shape[1]}"
            )
    else:
        _, _, pts = geo.sample_points(M, config.points, seed=config.seed, pad=0.05)
    metric = "geodesic" if config.kind == "inf" else "euclidean"
    cover = cut.cover_singular_set(
        pts, n, config.exponent, config.epsilon, metric=metric,
        containment="full" if config.kind == "inf" else "sixth",
    )
    if config.kind == "inf":
        fld = cut.build_inf_cutoff(cover)
        c_v = est.default_volume_growth(M, metric="geodesic", seed=config.seed)
        report = cut.gradient_integral_estimate(
            M, cover, fld, config.exponent, C_V=c_v, seed=config.seed
        )
        payload = {
            "integral": report.integral,
            "stderr": report.stderr,
            "bound": report.bound,
            "epsilon": report.epsilon,
            "C_V": report.c_v,
            "q": report.q,
            "n": report.dimension,
            "radii": list(cover.radii),
            "passed": report.passed,
        }
        ok = report.passed
    else:
        fld = cut.build_product_cutoff(cover)
        c_v = est.default_volume_growth(M, metric="chord", seed=config.seed)
        report = cut.mr_quality_report(M, fld, C_V=c_v, seed=config.seed)
        payload = {
            "area_not_one": report.area_not_one.value,
            "grad_l2": report.grad_l2.value,
            "lap_l1": report.lap_l1.value,
            "stderrs": [report.area_not_one.stderr, report.grad_l2.stderr, report.lap_l1.stderr],
            "bounds": list(report.bounds),
            "C_V": report.c_v,
            "C0": report.c0,
            "C1": report.c1,
            "passed": report.passed,
        }
        ok = report.passed
    path = _write_report(config, payload)
    print(f"cutoff {config.tag()} kind={config.kind}: "
          + ", ".join(f"{k}={v:.4g}" for k, v in payload.items() if isinstance(v, float))
          + f" -> {path}")
    return 0 if ok else 1


def _run_estimates(config: RunConfig):
    M = config.surface()
    lam1 = -float(M.dimension) if config.family == "equator" else -2.0 * M.dimension
    c_v = est.default_volume_growth(M, seed=config.seed)
    _, _, centers = geo.sample_points(M, max(config.points, 1), seed=config.seed)
    reports = []
    for r in config.radii:
        for c in centers:
            reports.append(est.local_A_bound(M, c, r, lam1, C_V=c_v, seed=config.seed))
    reports.append(est.l4_identity_check(M))
    rows = [rep.row() for rep in reports]
    payload = {"rows": rows, "lambda1": lam1, "C_V": c_v}
    path = _write_report(config, payload, rows, ["name", "n", "lhs", "rhs", "margin", "stderr"])
    ok = all(rep.passed for rep in reports)
    print(f"estimates {config.tag()}: {len(reports)} reports, "
          f"min margin {min(rep.margin for rep in reports):.3g} -> {path}")
    return 0 if ok else 1


def _run_cone_table(config: RunConfig):
    table = est.cone_stability_table(config.n_max)
    rows = [
        {
            "n": v.n,
            "link_bound": v.link_bound,
            "threshold": v.threshold,
            "stable_possible": v.stable_possible,
            "margin": v.margin,
        }
        for v in table
    ]
    payload = {"rows": rows}
    path = _write_report(
        config, payload, rows, ["n", "link_bound", "threshold", "stable_possible", "margin"]
    )
    ok = all(v.stable_possible == (v.n >= 6) for v in table)
    first_true = next((v.n for v in table if v.stable_possible), None)
    print(f"cone-table: first stable-possible link dimension {first_true} -> {path}")
    return 0 if ok else 1


_COMMANDS = {
    "spectrum": _run_spectrum,
    "simons": _run_simons,
    "cutoff": _run_cutoff,
    "estimates": _run_estimates,
    "cone-table": _run_cone_table,
}


def _int_list(text):
    return [int(v) for v in text.split(",") if v]


def _float_list(text):
    return [float(v) for v in text.split(",") if v]


def build_parser():
    parser = argparse.ArgumentParser(
        prog="spherestab",
        description="stability spectra and cutoff estimates for minimal hypersurfaces of the sphere",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, surface=True):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help=f"output directory (default ${OUTDIR_ENV} or .)")
        p.add_argument("--format", choices=("csv", "json"), default=None)
        if surface:
            p.add_argument("--family", choices=("equator", "clifford"), default=None)
            p.add_argument("--k", type=int, default=None)
            p.add_argument("--l", type=int, default=None)
            p.add_argument("--n", type=int, default=None)

    p = sub.add_parser("spectrum", help="first stability eigenvalue, analytic and numeric")
    common(p)
    p.add_argument("--resolutions", type=_int_list, default=None)

    p = sub.add_parser("simons", help="curvature identity residuals")
    common(p)
    p.add_argument("--samples", type=int, default=None)

    p = sub.add_parser("cutoff", help="cover a synthetic singular set and measure the cutoff")
    common(p)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--singular-set", dest="singular_set", default=None,
                   help="plain-text point cloud (one point per line) instead of sampled points")
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--exponent", type=float, default=None, help="budget/integrand exponent q")
    p.add_argument("--kind", choices=("inf", "product"), default=None)

    p = sub.add_parser("estimates", help="local curvature-energy bounds and the L4 identity")
    common(p)
    p.add_argument("--radii", type=_float_list, default=None)
    p.add_argument("--points", type=int, default=None, help="number of ball centers")

    p = sub.add_parser("cone-table", help="cone stability verdicts for n = 1..n_max")
    common(p, surface=False)
    p.add_argument("--n-max", dest="n_max", type=int, default=None)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _build_config(args)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[config.command](config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (BudgetInfeasible, InsufficientSamples, NoConvergence) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except BoundViolation as exc:
        print(f"bound violation: {exc}", file=sys.stderr)
        return 1
    except SpherestabError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
