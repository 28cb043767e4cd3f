"""Sphere-integral machinery for the cone inequality and its equality cases.

For a parabola cone p and its interpolation p_t = t p + (1-t) P_d toward
the radial cone, this module evaluates

    Q(t) = int_{S^(d-1)} (|grad p_t|^2 / p_t) (p_t - |x|^2/(2d))

both directly and through the expanded form

    Q(t) = t^2 [ int |grad_tau p|^2 + 4 int (p - P_d)^2
                 - (1/2d) int |grad_tau p|^2 / p_t ],

plus q(t) = Q(t)/t^2, its second derivative

    q''(t) = -(1/d) int (|grad_tau p|^2 / p_t^3)(p - P_d)^2 <= 0,

the equality-case classification (Q(1) = 0 iff the cone is symmetric), and
the one-dimension-down reduction with constant ((d-1)/d) W_{d-2}.

Everything is computed in the cone eigenbasis: nodes are rotated once per
(cone, rule) pair and all integrals reduce to weighted passes over squared
coordinates (see `backend.q_node_pass`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import backend
from .cones import (PSD_TOL, Interpolation, NearestSymmetric, ParabolaCone,
                    interpolate, nearest_symmetric, t_bar)
from .sphere import MIN_LEVEL, SphereRule, build_rule, surface_area, wallis

KERNEL_FLOOR = 1e-14        # p_t below this contributes zero to divided terms
EQUALITY_DIST_TOL = 1e-8    # spectrum distance defining the symmetric family
ERROR_BAND_FACTOR = 10.0    # verdict tolerance = factor * quad_error
DEGENERATE_RATIO_GUARD = 10.0


@lru_cache(maxsize=64)
def cached_rule(dim: int, level: int) -> SphereRule:
    """Rules are immutable, so sweeps share them freely."""
    return build_rule(dim, level)


def quad_error_floor(dim: int) -> float:
    """Roundoff floor added to Richardson estimates: a two-level difference
    can round to zero, but no quadrature value is better than eps-scale."""
    return 32.0 * np.finfo(float).eps * surface_area(dim)


class ConeOnRule:
    """Per-(cone, rule) cache: squared node coordinates in the eigenbasis."""

    def __init__(self, cone: ParabolaCone, rule: SphereRule) -> None:
        if cone.dim != rule.dim:
            raise ValueError(f"cone dim {cone.dim} != rule dim {rule.dim}")
        self.cone = cone
        self.rule = rule
        self.y2 = np.ascontiguousarray((rule.nodes @ cone.eigenvectors) ** 2)
        self.lam = np.ascontiguousarray(cone.eigenvalues)
        self.inv2d = 1.0 / (2.0 * cone.dim)

    def node_pass(self, lam_t: np.ndarray):
        # interpolated spectra are projected onto the PSD cone: a -1e-16
        # eigenvalue at t near t_bar is accepted noise, but the 1/p_t
        # integrands amplify it through near-kernel nodes
        lam_t = np.ascontiguousarray(np.maximum(lam_t, 0.0))
        return backend.q_node_pass(self.y2, self.rule.weights, lam_t,
                                   self.lam, self.inv2d, KERNEL_FLOOR)


def _interp_or_raise(cone: ParabolaCone, t: float) -> Interpolation:
    itp = interpolate(cone, t)
    if not itp.is_psd:
        raise ValueError(
            f"t = {t} exceeds the degeneration parameter t_bar = {t_bar(cone)}")
    return itp


def q_integrand(matrix_t, x, dim: int | None = None) -> float:
    """Reference single-point integrand (|A_t x|^2 / p_t)(p_t - 1/(2d)).

    Returns 0 below the kernel floor; the production path runs the same
    arithmetic in the eigenbasis over all nodes at once.
    """
    A = np.asarray(matrix_t, dtype=float)
    d = A.shape[0] if dim is None else dim
    if A.shape != (d, d):
        raise ValueError(f"matrix shape {A.shape} incompatible with dim {d}")
    if abs(float(np.trace(A)) - 1.0) > 1e-10:
        raise ValueError("interpolated matrix must have unit trace")
    if float(np.max(np.abs(A - A.T))) > 1e-12:
        raise ValueError("interpolated matrix must be symmetric")
    x = np.asarray(x, dtype=float)
    if abs(float(np.linalg.norm(x)) - 1.0) > 1e-10:
        raise ValueError("x must be a unit point")
    ax = A @ x
    p = 0.5 * float(x @ ax)
    if p <= KERNEL_FLOOR:
        return 0.0
    return float(ax @ ax) / p * (p - 1.0 / (2.0 * d))


def Q_direct(cone: ParabolaCone, t: float, rule: SphereRule,
             prepared: ConeOnRule | None = None) -> float:
    """Quadrature of the direct integrand for p_t."""
    itp = _interp_or_raise(cone, t)
    pre = prepared if prepared is not None else ConeOnRule(cone, rule)
    qd, _, _, _, _ = pre.node_pass(itp.eigenvalues)
    return qd


def Q_expanded(cone: ParabolaCone, t: float, rule: SphereRule,
               prepared: ConeOnRule | None = None) -> float:
    """The expanded form of Q(t); equals Q_direct up to quadrature error."""
    itp = _interp_or_raise(cone, t)
    if t == 0.0:
        return 0.0
    pre = prepared if prepared is not None else ConeOnRule(cone, rule)
    _, t1, t2, t3, _ = pre.node_pass(itp.eigenvalues)
    return t * t * (t1 + 4.0 * t2 - pre.inv2d * t3)


def q_value(cone: ParabolaCone, t: float, rule: SphereRule,
            prepared: ConeOnRule | None = None) -> float:
    """q(t) = Q(t)/t^2, with the t = 0 limit 4 int (p - P_d)^2 built in."""
    if t < 0.0:
        raise ValueError(f"t must be nonnegative, got {t}")
    pre = prepared if prepared is not None else ConeOnRule(cone, rule)
    itp = _interp_or_raise(cone, t)
    _, t1, t2, t3, _ = pre.node_pass(itp.eigenvalues)
    if t == 0.0:
        return 4.0 * t2
    return t1 + 4.0 * t2 - pre.inv2d * t3


def q_second_derivative(cone: ParabolaCone, t: float, rule: SphereRule,
                        prepared: ConeOnRule | None = None) -> float:
    """q''(t) = -(1/d) int (|grad_tau p|^2 / p_t^3)(p - P_d)^2, for t
    strictly inside (0, t_bar)."""
    tb = t_bar(cone)
    if not 0.0 < t < tb:
        raise ValueError(f"t must lie strictly inside (0, {tb}), got {t}")
    pre = prepared if prepared is not None else ConeOnRule(cone, rule)
    itp = interpolate(cone, t)
    _, _, _, _, sdd = pre.node_pass(itp.eigenvalues)
    return -sdd / cone.dim


@dataclass(frozen=True)
class QReport:
    """Cross-validation record for one (cone, t): both Q formulas and the
    measured quadrature error they must agree within."""

    cone: ParabolaCone
    t: float
    q_direct: float
    q_expanded: float
    quad_error: float
    rule_level: int


def q_report(cone: ParabolaCone, t: float, rule_hi: SphereRule,
             rule_lo: SphereRule | None = None) -> QReport:
    if rule_lo is None:
        rule_lo = cached_rule(cone.dim, max(rule_hi.level // 2, MIN_LEVEL))
    pre_hi = ConeOnRule(cone, rule_hi)
    pre_lo = ConeOnRule(cone, rule_lo)
    qd_hi = Q_direct(cone, t, rule_hi, pre_hi)
    qd_lo = Q_direct(cone, t, rule_lo, pre_lo)
    qe = max(abs(qd_hi - qd_lo), quad_error_floor(cone.dim))
    return QReport(cone, float(t), qd_hi, Q_expanded(cone, t, rule_hi, pre_hi),
                   qe, rule_hi.level)


@dataclass(frozen=True)
class InequalityVerdict:
    """Outcome of the main inequality check at t = 1 for one cone.

    `anomaly` records a violated equivalence between the measured equality
    case (|Q1| within the error band) and spectral membership in the
    symmetric family; anomalies are data, not errors.
    """

    cone: ParabolaCone
    Q1: float
    quad_error: float
    margin: float
    is_equality_case: bool
    nearest_k: int
    dist_to_SP: float
    anomaly: bool


# level caps for classification escalation, sized by rule growth per dim
_ESCALATION_CAP = {1: 4, 2: 8192, 3: 1024, 4: 128, 5: 32}


def verify_inequality(cone: ParabolaCone, rule: SphereRule,
                      rule_lo: SphereRule | None = None) -> InequalityVerdict:
    """Main-inequality verdict at t = 1 with equality-case classification.

    A cone drawn near (but not on) the symmetric family can have |Q1|
    inside the error band of a fixed-level rule while its spectrum is
    clearly asymmetric; the band shrinks much faster than the distance
    under refinement, so on such a disagreement the measurement escalates
    (levels double, capped per dimension) until the two notions agree or
    the cap declares a genuine anomaly.
    """
    if rule_lo is None:
        rule_lo = cached_rule(cone.dim, max(rule.level // 2, MIN_LEVEL))
    near: NearestSymmetric = nearest_symmetric(cone)
    spectral_eq = near.distance <= EQUALITY_DIST_TOL
    level = rule.level
    while True:
        q1 = Q_direct(cone, 1.0, rule)
        q1_lo = Q_direct(cone, 1.0, rule_lo)
        qe = max(abs(q1 - q1_lo), quad_error_floor(cone.dim))
        is_eq = abs(q1) <= ERROR_BAND_FACTOR * qe
        if is_eq == spectral_eq or 2 * level > _ESCALATION_CAP[cone.dim]:
            break
        level *= 2
        # escalation rules bypass the cache: the large ones are rare one-offs
        rule_lo, rule = rule, build_rule(cone.dim, level)
    anomaly = is_eq != spectral_eq
    return InequalityVerdict(cone, q1, qe, q1, is_eq, near.k, near.distance,
                             anomaly)


@dataclass(frozen=True)
class DimensionReduction:
    """Measured vs predicted ratio between the d- and (d-1)-dimensional
    inequality integrals for a cylindrically lifted cone.

    When the lower-dimensional integral vanishes (equality-case cone, e.g.
    every 1-D cone) the combined ratio is 0/0; the ratio of the gradient
    pieces int |grad|^2, which scales by the same constant slice by slice,
    is measured instead and `from_gradient_pieces` is set.
    """

    alpha_measured: float
    alpha_predicted: float
    numerator: float
    denominator: float
    from_gradient_pieces: bool


def lift_cone(cone: ParabolaCone) -> ParabolaCone:
    """Embed a (d-1)-cone into d dimensions with a zero row/column, making
    it invariant along the last axis (trace is unchanged)."""
    d = cone.dim + 1
    A = np.zeros((d, d))
    A[:-1, :-1] = cone.matrix
    return ParabolaCone(A)


def _gradient_sq_integral(cone: ParabolaCone, rule: SphereRule) -> float:
    g2 = (rule.nodes @ cone.eigenvectors) ** 2 @ (cone.eigenvalues ** 2)
    return float(rule.weights @ g2)


def dimension_reduction_check(q_cone: ParabolaCone, rule_d: SphereRule,
                              rule_dm1: SphereRule) -> DimensionReduction:
    """Compare the measured reduction ratio against ((d-1)/d) W_{d-2}."""
    d = q_cone.dim + 1
    if rule_d.dim != d or rule_dm1.dim != q_cone.dim:
        raise ValueError("rule dimensions must be (d, d-1) around the cone")
    lifted = lift_cone(q_cone)
    num = Q_direct(lifted, 1.0, rule_d)
    den = Q_direct(q_cone, 1.0, rule_dm1)
    lo = cached_rule(q_cone.dim, max(rule_dm1.level // 2, MIN_LEVEL))
    den_err = max(abs(den - Q_direct(q_cone, 1.0, lo)),
                  quad_error_floor(q_cone.dim))
    predicted = (d - 1) / d * wallis(d - 2)
    if abs(den) > DEGENERATE_RATIO_GUARD * den_err:
        return DimensionReduction(num / den, predicted, num, den, False)
    g_num = _gradient_sq_integral(lifted, rule_d)
    g_den = _gradient_sq_integral(q_cone, rule_dm1)
    return DimensionReduction(g_num / g_den, predicted, num, den, True)


_FAMILIES = ("interior", "boundary", "near_symmetric")
_NEAR_SYMMETRIC_SCALE = 1e-3


def random_parabola(dim: int, rng_seed, family: str = "interior") -> ParabolaCone:
    """Deterministic random cone of the requested family.

    interior: normalized G G^T of a square standard-normal G (full rank);
    boundary: normalized G^T G with G of r < d rows (zero eigenvalues);
    near_symmetric: a P_k spectrum nudged by +-1e-3, renormalized, randomly
    rotated.
    """
    if dim < 1:
        raise ValueError(f"dim must be positive, got {dim}")
    if family not in _FAMILIES:
        raise ValueError(f"family must be one of {_FAMILIES}, got {family!r}")
    rng = np.random.default_rng(rng_seed)
    if dim == 1:
        return ParabolaCone([[1.0]])
    if family == "interior":
        g = rng.standard_normal((dim, dim))
        a = g @ g.T
    elif family == "boundary":
        r = int(rng.integers(1, dim))
        g = rng.standard_normal((r, dim))
        a = g.T @ g
    else:
        k = int(rng.integers(1, dim + 1))
        lam = np.zeros(dim)
        lam[:k] = 1.0 / k
        lam = np.maximum(lam + rng.uniform(-_NEAR_SYMMETRIC_SCALE,
                                           _NEAR_SYMMETRIC_SCALE, dim), 0.0)
        lam = np.sort(lam / lam.sum())[::-1]
        q, r_ = np.linalg.qr(rng.standard_normal((dim, dim)))
        q = q * np.sign(np.diag(r_))
        a = (q * lam) @ q.T
    a = 0.5 * (a + a.T)
    a /= np.trace(a)
    return ParabolaCone(a)


def chebyshev_grid(lo: float, hi: float, count: int) -> np.ndarray:
    """Chebyshev-spaced points in (lo, hi), densest near the endpoints."""
    if not (count >= 1 and hi > lo):
        raise ValueError("need count >= 1 and hi > lo")
    k = np.arange(count)
    nodes = np.cos((2 * k + 1) * math.pi / (2 * count))
    return np.sort(0.5 * (lo + hi) + 0.5 * (hi - lo) * nodes)


def concavity_scan_grid(cone: ParabolaCone, count: int = 33,
                        t_cap: float = 4.0) -> np.ndarray:
    """Scan grid strictly inside (0, t_bar): Chebyshev points avoiding both
    endpoints by a relative margin of 1e-3 (the q'' integrand degenerates
    at t_bar)."""
    tb = t_bar(cone)
    hi = min(tb, t_cap)
    return chebyshev_grid(hi * 1e-3, hi * (1.0 - 1e-3), count)
