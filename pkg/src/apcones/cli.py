"""Command-line front end: verification suites and the concentration
experiment, with CSV/JSON reports.

Subcommands
    selftest            quadrature, Wallis, cone-invariant and exact-cone checks
    verify-inequality   Q(1) >= 0 sweep over random cones, equality bookkeeping
    q-curve             Q(t)/q(t)/q''(t) scan for one cone
    solve               one energy minimization, field dump + diagnostics row
    concentrate         distance to the symmetric cones as gamma -> 1

Exit status: 0 all assertions passed, 1 assertion failure, 2 usage error,
3 unconverged solve.  CSV cells use decimal17 formatting (an infinite
degeneration parameter prints as `inf`); a parabola cone serializes as the
row-major upper triangle of its matrix in decimal text.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from . import backend
from .cones import (ParabolaCone, SymmetricCone, interpolate, make_exponent,
                    nearest_symmetric, t_bar)
from .inequality import (ConeOnRule, cached_rule, concavity_scan_grid,
                         quad_error_floor, random_parabola, verify_inequality)
from .sphere import build_rule, surface_area, wallis
from .solver import (GridField, SolverConfig, contact_fraction,
                     discrete_energy, el_residual, green_identity_check,
                     homogeneity_defect, linf_distance_to_cone, make_field,
                     minimize, transform_field, write_field)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_UNCONVERGED = 0, 1, 2, 3
ERROR_BAND_FACTOR = 10.0
FD_STEP = 1e-3


class UsageError(ValueError):
    """Bad command-line input detected after argparse."""


def fmt_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            raise ValueError("NaN is not allowed in report cells")
        return f"{v:.17g}"
    return str(v)


@dataclass
class RunReport:
    """One command's tabular output plus its machine-readable summary."""

    command: str
    seed: int
    dim: int
    params: dict
    columns: list
    rows: list = dataclass_field(default_factory=list)
    summary: dict = dataclass_field(default_factory=lambda: {
        "pass_count": 0, "fail_count": 0, "anomaly_count": 0})

    def csv_text(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(fmt_cell(v) for v in row))
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.csv_text())

    def summary_json(self) -> str:
        return json.dumps({"command": self.command, "seed": self.seed,
                           "dim": self.dim, "params": self.params,
                           "summary": self.summary}, sort_keys=True)


def serialize_cone(cone: ParabolaCone) -> str:
    """Row-major upper triangle of the cone matrix as decimal text."""
    d = cone.dim
    return " ".join(f"{cone.matrix[i, j]:.17g}"
                    for i in range(d) for j in range(i, d))


def parse_cone(text: str) -> ParabolaCone:
    vals = [float(tok) for tok in text.split()]
    d = int((math.isqrt(8 * len(vals) + 1) - 1) // 2)
    if d * (d + 1) // 2 != len(vals):
        raise UsageError(f"{len(vals)} entries do not form an upper triangle")
    A = np.zeros((d, d))
    it = iter(vals)
    for i in range(d):
        for j in range(i, d):
            A[i, j] = A[j, i] = next(it)
    return ParabolaCone(A)


def parse_eigenvalues(text: str, dim: int) -> np.ndarray:
    eigs = np.array([float(tok) for tok in text.split(",")])
    if eigs.size != dim:
        raise UsageError(f"expected {dim} eigenvalues, got {eigs.size}")
    dev = abs(float(eigs.sum()) - 1.0)
    if dev > 1e-12:
        raise UsageError(f"eigenvalues must sum to 1 (deviation {dev:.3e})")
    return eigs


def parse_boundary(spec: str, dim: int, exponent):
    """Boundary data factory from `flat[:e]`, `parabola:eigs`, `symmetric:k`.

    Returns (label, vectorized data callable).
    """
    kind, _, rest = spec.partition(":")
    if kind == "flat":
        if rest:
            e = np.array([float(t) for t in rest.split(",")])
            if e.size != dim:
                raise UsageError(f"flat direction needs {dim} components")
            e = e / np.linalg.norm(e)
        else:
            e = np.zeros(dim)
            e[0] = 1.0
        from .cones import flat_cone_eval
        return spec, lambda pts: flat_cone_eval(exponent, e, pts)
    if kind == "parabola":
        eigs = parse_eigenvalues(rest, dim)
        cone = ParabolaCone(np.diag(eigs))
        return spec, cone.evaluate
    if kind == "symmetric":
        try:
            k = int(rest)
        except ValueError:
            raise UsageError(f"symmetric boundary needs an integer k, got {rest!r}")
        cone = SymmetricCone(dim, k)
        return spec, cone.evaluate
    raise UsageError(f"unknown boundary spec {spec!r} "
                     "(expected flat[:e], parabola:eigs or symmetric:k)")


# ---------------------------------------------------------------------------
# selftest


def rule_checks(rule) -> list:
    """Named invariant checks for one quadrature rule."""
    checks = []
    d = rule.dim
    area = surface_area(d)
    w_sum = float(rule.weights.sum())
    checks.append((f"sum-of-weights[d={d}]",
                   abs(w_sum - area) <= 1e-10 * area,
                   f"sum={w_sum!r} expected={area!r}"))
    checks.append((f"positive-weights[d={d}]", bool(np.all(rule.weights > 0.0)), ""))
    norms = np.linalg.norm(rule.nodes, axis=1)
    checks.append((f"unit-nodes[d={d}]",
                   float(np.max(np.abs(norms - 1.0))) <= 1e-12, ""))
    second = rule.nodes.T * rule.weights @ rule.nodes
    target = np.eye(d) * area / d
    checks.append((f"second-moments[d={d}]",
                   float(np.max(np.abs(second - target))) <= 1e-8 * area, ""))
    odd = rule.weights @ rule.nodes
    checks.append((f"odd-moments[d={d}]",
                   float(np.max(np.abs(odd))) <= 1e-10, ""))
    return checks


def wallis_checks() -> list:
    checks = [("wallis-w0", wallis(0) == math.pi, ""),
              ("wallis-w2", abs(wallis(2) - math.pi / 2.0) <= 1e-14, "")]
    ok = all(abs(wallis(m) - (m - 1) / m * wallis(m - 2))
             <= 1e-14 * wallis(m) for m in range(2, 13))
    checks.append(("wallis-recursion", ok, "m <= 12"))
    return checks


def cone_checks() -> list:
    checks = []
    ok, detail = True, ""
    for d in (2, 3, 4):
        for i in range(5):
            cone = random_parabola(d, (977, d, i), "interior")
            x = np.full(d, 1.0 / math.sqrt(d))
            p = cone.evaluate(x)
            g = cone.matrix @ x
            bound = float(g @ g) / p <= 2.0 * cone.eigenvalues[0] + 1e-12
            homog = abs(cone.evaluate(0.5 * x) - 0.25 * p) <= 1e-15
            if not (bound and homog):
                ok, detail = False, f"dim={d} sample={i}"
    checks.append(("cone-invariants", ok, detail))
    return checks


def exact_cone_checks() -> list:
    exp1 = make_exponent(1.0)
    cone = SymmetricCone(2, 2)
    fld = make_field(2, 41, cone.evaluate)
    res2 = el_residual(fld, exp1)
    half = SymmetricCone(1, 0)
    fld1 = make_field(1, 41, half.evaluate)
    res1 = el_residual(fld1, exp1)
    return [("exact-cone-residual", res2 <= 1e-10 and res1 <= 1e-10,
             f"P_2: {res2:.3e}, half-space: {res1:.3e}")]


def selftest_checks() -> list:
    checks = []
    for d in (1, 2, 3, 4, 5):
        checks.extend(rule_checks(cached_rule(d, 8)))
    checks.extend(wallis_checks())
    checks.extend(cone_checks())
    checks.extend(exact_cone_checks())
    return checks


def cmd_selftest(ns) -> tuple:
    report = RunReport("selftest", 0, 0, {"backend": backend.backend_name()},
                       ["check", "ok", "detail"])
    failures = 0
    for name, ok, detail in selftest_checks():
        report.rows.append((name, bool(ok), detail))
        failures += 0 if ok else 1
        print(f"{'PASS' if ok else 'FAIL'} {name}" + (f": {detail}" if not ok else ""))
    report.summary["pass_count"] = len(report.rows) - failures
    report.summary["fail_count"] = failures
    return report, EXIT_OK if failures == 0 else EXIT_FAIL


# ---------------------------------------------------------------------------
# verify-inequality


def cmd_verify_inequality(ns) -> tuple:
    if ns.dim not in (2, 3, 4, 5):
        raise UsageError(f"--dim must be 2..5, got {ns.dim}")
    if ns.samples < 0:
        raise UsageError("--samples must be nonnegative")
    rule = cached_rule(ns.dim, ns.level)
    rule_lo = cached_rule(ns.dim, max(ns.level // 2, 4))
    report = RunReport("verify-inequality", ns.seed, ns.dim,
                       {"samples": ns.samples, "level": ns.level,
                        "family": ns.family},
                       ["sample_id", "eigenvalues", "Q1", "quad_error",
                        "margin", "nearest_k", "dist_to_SP", "anomaly"])
    failures = anomalies = 0
    for i in range(ns.samples):
        cone = random_parabola(ns.dim, (ns.seed, i), ns.family)
        v = verify_inequality(cone, rule, rule_lo)
        eigtext = ";".join(f"{x:.17g}" for x in cone.eigenvalues)
        report.rows.append((i, eigtext, v.Q1, v.quad_error, v.margin,
                            v.nearest_k, v.dist_to_SP, v.anomaly))
        bad = v.margin < -ERROR_BAND_FACTOR * v.quad_error
        failures += int(bad)
        anomalies += int(v.anomaly)
    report.summary["pass_count"] = ns.samples - failures
    report.summary["fail_count"] = failures
    report.summary["anomaly_count"] = anomalies
    code = EXIT_OK if failures == 0 and anomalies == 0 else EXIT_FAIL
    return report, code


# ---------------------------------------------------------------------------
# q-curve


def cmd_q_curve(ns) -> tuple:
    if ns.boundary and ns.boundary.startswith("parabola:"):
        eigs = parse_eigenvalues(ns.boundary.partition(":")[2], ns.dim)
        cone = ParabolaCone(np.diag(eigs))
    elif ns.boundary:
        raise UsageError("q-curve accepts only parabola:eigs or --seed cones")
    else:
        cone = random_parabola(ns.dim, ns.seed, "interior")
    rule = cached_rule(ns.dim, ns.level)
    rule_lo = cached_rule(ns.dim, max(ns.level // 2, 4))
    pre, pre_lo = ConeOnRule(cone, rule), ConeOnRule(cone, rule_lo)
    d = cone.dim
    floor = quad_error_floor(d)
    ts = concavity_scan_grid(cone, ns.t_points)

    def q_pieces(prep, t):
        lam_t = interpolate(cone, t).eigenvalues
        qd, t1, t2, t3, sdd = prep.node_pass(lam_t)
        qval = t1 + 4.0 * t2 - prep.inv2d * t3
        return qd, qval, -sdd / d

    report = RunReport("q-curve", ns.seed, ns.dim,
                       {"level": ns.level, "t_points": ns.t_points,
                        "cone": serialize_cone(cone), "t_bar": fmt_cell(t_bar(cone))},
                       ["t", "Q_direct", "Q_expanded", "q",
                        "q_dd_formula", "q_dd_finite_diff"])
    failures = 0
    qs_hi = []
    for t in ts:
        qd, qval, qdd = q_pieces(pre, t)
        qd_lo, qval_lo, qdd_lo = q_pieces(pre_lo, t)
        _, q_m, _ = q_pieces(pre, t - FD_STEP)
        _, q_p, _ = q_pieces(pre, t + FD_STEP)
        q_fd = (q_p - 2.0 * qval + q_m) / (FD_STEP * FD_STEP)
        q_exp = t * t * qval
        report.rows.append((t, qd, q_exp, qval, qdd, q_fd))
        qe = max(abs(qd - qd_lo), floor)
        qe_dd = max(abs(qdd - qdd_lo), floor)
        row_ok = (abs(qd - q_exp) <= ERROR_BAND_FACTOR * qe
                  and qdd <= ERROR_BAND_FACTOR * qe_dd)
        failures += int(not row_ok)
        qs_hi.append((qval, max(abs(qval - qval_lo), floor)))
    # endpoint signs: the scan brackets (0, t_bar) tightly
    for qval, qe in (qs_hi[0], qs_hi[-1]):
        if qval < -ERROR_BAND_FACTOR * qe:
            failures += 1
    report.summary["pass_count"] = len(ts) - min(failures, len(ts))
    report.summary["fail_count"] = failures
    return report, EXIT_OK if failures == 0 else EXIT_FAIL


# ---------------------------------------------------------------------------
# solve


def run_solve(dim, gamma, n, boundary, sweep_limit=None):
    exponent = make_exponent(gamma)
    label, data = parse_boundary(boundary, dim, exponent)
    kwargs = {"exponent": exponent}
    if sweep_limit:
        kwargs["sweep_limit"] = sweep_limit
    config = SolverConfig(**kwargs)
    fld, diag = minimize(data, config, dim, n)
    return exponent, label, fld, diag


def cmd_solve(ns) -> tuple:
    if ns.dim not in (1, 2, 3):
        raise UsageError(f"--dim must be 1..3 for solve, got {ns.dim}")
    exponent, label, fld, diag = run_solve(ns.dim, ns.gamma, ns.n, ns.boundary)
    report = RunReport("solve", ns.seed, ns.dim,
                       {"boundary": label, "gamma": ns.gamma, "n": ns.n},
                       ["gamma", "n", "energy", "el_residual",
                        "homogeneity_defect", "contact_fraction", "converged"])
    report.rows.append((ns.gamma, ns.n, discrete_energy(fld, exponent),
                        el_residual(fld, exponent),
                        homogeneity_defect(fld, exponent.beta),
                        contact_fraction(fld), diag.converged))
    if ns.out:
        write_field(fld, ns.out, ns.gamma)
    report.summary["pass_count"] = int(diag.converged)
    report.summary["fail_count"] = 0
    code = EXIT_OK if diag.converged else EXIT_UNCONVERGED
    return report, code


# ---------------------------------------------------------------------------
# concentrate


def fit_rotation(fld: GridField) -> np.ndarray:
    """Eigenframe of the least-squares quadratic fit of the field over
    |x| <= 1/2; rows are the fitted principal directions (descending)."""
    sel = fld.in_ball().ravel()
    pts = fld.points()
    r2 = np.sum(pts * pts, axis=1)
    sel &= r2 <= 0.25
    x = pts[sel]
    y = fld.values.ravel()[sel]
    d = fld.dim
    cols, pairs = [], []
    for i in range(d):
        for j in range(i, d):
            cols.append(0.5 * x[:, i] * x[:, j] if i == j else x[:, i] * x[:, j])
            pairs.append((i, j))
    design = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    H = np.zeros((d, d))
    for c, (i, j) in zip(coef, pairs):
        if i == j:
            H[i, i] = c
        else:
            H[i, j] = H[j, i] = c
    lam, vec = np.linalg.eigh(H)
    R = vec[:, ::-1].T.copy()
    if np.linalg.det(R) < 0:
        R[-1] *= -1.0
    return R


def cmd_concentrate(ns) -> tuple:
    if ns.dim not in (2, 3):
        raise UsageError(f"--dim must be 2 or 3 for concentrate, got {ns.dim}")
    gammas = [float(t) for t in ns.gammas.split(",")]
    if any(g == 1.0 for g in gammas):
        raise UsageError("gamma = 1 is not admissible for concentrate")
    rule = cached_rule(ns.dim, ns.level)
    rule_lo = cached_rule(ns.dim, max(ns.level // 2, 4))
    report = RunReport("concentrate", ns.seed, ns.dim,
                       {"gammas": ns.gammas, "n": ns.n, "boundary": ns.boundary,
                        "level": ns.level},
                       ["gamma", "beta", "dist_best", "k_best", "green_lhs",
                        "green_rhs", "el_residual", "contact_fraction"])
    results = {}
    all_converged = True
    green_err = 0.0
    for g in gammas:
        exponent, label, fld, diag = run_solve(ns.dim, g, ns.n, ns.boundary)
        all_converged &= diag.converged
        u = transform_field(fld, exponent)
        R = fit_rotation(u)
        dists = [(linf_distance_to_cone(u, SymmetricCone(ns.dim, k, R)), k)
                 for k in range(1, ns.dim + 1)]
        dist_best, k_best = min(dists)
        p_best = SymmetricCone(ns.dim, k_best, R).parabola()
        lhs, rhs = green_identity_check(u, p_best, exponent, rule)
        lhs_lo, rhs_lo = green_identity_check(u, p_best, exponent, rule_lo)
        green_err = max(green_err, abs(lhs - lhs_lo) + abs(rhs - rhs_lo))
        report.rows.append((g, exponent.beta, dist_best, k_best, lhs, rhs,
                            el_residual(fld, exponent), contact_fraction(fld)))
        results[g] = dist_best
    h = 2.0 / (ns.n - 1)
    slack = 2.0 * (h + green_err)
    ordered = sorted(gammas, key=lambda g: -abs(g - 1.0))
    failures = 0
    for a, b in zip(ordered, ordered[1:]):
        if results[b] > results[a] + slack:
            failures += 1
    report.summary["pass_count"] = len(gammas) - failures
    report.summary["fail_count"] = failures
    report.params["slack"] = fmt_cell(slack)
    if failures:
        return report, EXIT_FAIL
    return report, EXIT_OK if all_converged else EXIT_UNCONVERGED


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="apcones",
        description="Verification suites for homogeneous cones of the "
                    "Alt-Phillips energy and the obstacle problem.",
        epilog="Cone text format: row-major upper triangle of the matrix, "
               "decimal17. CSV floats use decimal17; infinities print as 'inf'.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("selftest", help="run built-in invariant checks")

    p = sub.add_parser("verify-inequality",
                       help="sample random cones and check Q(1) >= 0")
    p.add_argument("--dim", type=int, default=3, help="ambient dimension 2..5 (default 3)")
    p.add_argument("--samples", type=int, default=1000, help="number of cones (default 1000)")
    p.add_argument("--level", type=int, default=64,
                   help="fine quadrature level; the error pairs it with level/2 (default 64)")
    p.add_argument("--seed", type=int, default=0, help="base RNG seed (default 0)")
    p.add_argument("--family", choices=("interior", "boundary", "near_symmetric"),
                   default="interior", help="cone family to draw (default interior)")
    p.add_argument("--out", default=None, help="CSV output path")

    p = sub.add_parser("q-curve", help="scan Q(t), q(t), q''(t) for one cone")
    p.add_argument("--dim", type=int, default=2, help="ambient dimension (default 2)")
    p.add_argument("--boundary", default=None,
                   help="cone as parabola:EIG1,EIG2,... (sum 1); omit to use --seed")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for a random interior cone when no eigenvalues given")
    p.add_argument("--level", type=int, default=64, help="fine quadrature level (default 64)")
    p.add_argument("--t-points", type=int, default=33, dest="t_points",
                   help="number of scan points inside (0, t_bar) (default 33)")
    p.add_argument("--out", default=None, help="CSV output path")

    p = sub.add_parser("solve", help="minimize the energy for one exponent")
    p.add_argument("--dim", type=int, default=2, help="grid dimension 1..3 (default 2)")
    p.add_argument("--gamma", type=float, default=1.0, help="energy exponent (default 1)")
    p.add_argument("--n", type=int, default=201, help="odd nodes per axis (default 201)")
    p.add_argument("--boundary", default="symmetric:2",
                   help="flat[:e] | parabola:eigs | symmetric:k (default symmetric:2)")
    p.add_argument("--seed", type=int, default=0, help=argparse.SUPPRESS)
    p.add_argument("--out", default=None, help="field dump path (diagnostics go to stdout)")

    p = sub.add_parser("concentrate",
                       help="distance to symmetric cones along a gamma list")
    p.add_argument("--dim", type=int, default=2, help="grid dimension 2 or 3 (default 2)")
    p.add_argument("--gammas", required=True,
                   help="comma-separated exponents, all different from 1")
    p.add_argument("--n", type=int, default=201, help="odd nodes per axis (default 201)")
    p.add_argument("--boundary", default="parabola:0.75,0.25",
                   help="boundary data (default parabola:0.75,0.25)")
    p.add_argument("--level", type=int, default=32,
                   help="quadrature level for the Green identity (default 32)")
    p.add_argument("--seed", type=int, default=0, help=argparse.SUPPRESS)
    p.add_argument("--out", default=None, help="CSV output path")
    return parser


_COMMANDS = {"selftest": cmd_selftest,
             "verify-inequality": cmd_verify_inequality,
             "q-curve": cmd_q_curve,
             "solve": cmd_solve,
             "concentrate": cmd_concentrate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles --help and usage errors
        return int(exc.code or 0)
    try:
        report, code = _COMMANDS[ns.command](ns)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = getattr(ns, "out", None)
    if out and ns.command != "solve":
        report.write_csv(out)
    elif ns.command != "selftest":
        sys.stdout.write(report.csv_text())
    print(report.summary_json())
    return code


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
