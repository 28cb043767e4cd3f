"""Finite-difference minimization of the Alt-Phillips energy on the unit ball.

The energy int 1/2 |grad u|^2 + u^gamma 1_{u>0} is minimized over
nonnegative grid fields with Dirichlet data on the ring of ball nodes whose
stencil leaves the ball.  The iteration is projected red-black SOR on the
regularized Euler-Lagrange equation

    Lap_h u = gamma * max(u, delta)^(gamma-1),

with continuation over a decreasing schedule of floors delta.  Clamping at
zero after every node update keeps u >= 0 exactly; for gamma = 1 the scheme
is the classical projected SOR for the obstacle problem.

Also here: the 2-homogeneous transform u = v^(2-gamma)/(gamma(2-gamma)),
residuals of both the raw and the transformed equation, homogeneity and
contact diagnostics, the Green-identity pair on an inset sphere, and the
plain-text field dump.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field
from functools import lru_cache

import numpy as np

from . import backend
from .cones import Exponent
from .inequality import KERNEL_FLOOR
from .sphere import SphereRule

MASK_INTERIOR, MASK_DIRICHLET, MASK_EXTERIOR = 0, 1, 2
FB_THRESHOLD_FACTOR = 10.0   # free-boundary indicator threshold = factor * h^2
GREEN_INSET_CELLS = 2.0      # Green-identity sphere radius 1 - 2h
SUPPORTED_GRID_DIMS = (1, 2, 3)


def axis_coords(n: int) -> np.ndarray:
    return np.linspace(-1.0, 1.0, n)


def grid_points(dim: int, n: int) -> np.ndarray:
    """All lattice nodes of [-1,1]^d in row-major order, shape (n^d, d)."""
    grids = np.meshgrid(*([axis_coords(n)] * dim), indexing="ij")
    return np.column_stack([g.ravel() for g in grids])


@lru_cache(maxsize=32)
def _geometry(dim: int, n: int):
    """Mask plus flattened interior stencil tables, cached per (dim, n).

    Returns (mask, idx_all, nb_all, idx_red, nb_red, idx_black, nb_black)
    with neighbor columns ordered [axis0-, axis0+, axis1-, axis1+, ...].
    """
    shape = (n,) * dim
    pts = grid_points(dim, n)
    r2 = np.sum(pts * pts, axis=1).reshape(shape)
    inside = r2 <= 1.0
    ok = r2 < 1.0
    padded = np.pad(inside, 1, constant_values=False)
    center = (slice(1, -1),) * dim
    for ax in range(dim):
        for delta in (0, 2):
            sl = list(center)
            sl[ax] = slice(delta, delta + n)
            ok = ok & padded[tuple(sl)]
    mask = np.where(ok, MASK_INTERIOR,
                    np.where(inside, MASK_DIRICHLET, MASK_EXTERIOR)).astype(np.int8)

    idx_all = np.flatnonzero(mask.ravel() == MASK_INTERIOR).astype(np.int64)
    strides = np.array([n ** (dim - 1 - a) for a in range(dim)], dtype=np.int64)
    nb_all = np.empty((idx_all.size, 2 * dim), dtype=np.int64)
    for a in range(dim):
        nb_all[:, 2 * a] = idx_all - strides[a]
        nb_all[:, 2 * a + 1] = idx_all + strides[a]
    parity = np.zeros(idx_all.size, dtype=np.int64)
    rem = idx_all.copy()
    for a in range(dim):
        coord = rem // strides[a]
        rem = rem - coord * strides[a]
        parity += coord
    red = parity % 2 == 0
    arrays = (mask, idx_all, nb_all,
              np.ascontiguousarray(idx_all[red]), np.ascontiguousarray(nb_all[red]),
              np.ascontiguousarray(idx_all[~red]), np.ascontiguousarray(nb_all[~red]))
    for a in arrays:
        a.setflags(write=False)
    return arrays


@dataclass
class GridField:
    """Nonnegative scalar field on the Cartesian lattice over [-1,1]^d.

    `mask` tags nodes interior / dirichlet / exterior; solvers update only
    interior values and never touch the Dirichlet ring.
    """

    dim: int
    n: int
    h: float
    values: np.ndarray   # shape (n,)*dim
    mask: np.ndarray     # int8, same shape

    def interior(self) -> np.ndarray:
        return self.mask == MASK_INTERIOR

    def in_ball(self) -> np.ndarray:
        return self.mask != MASK_EXTERIOR

    def points(self) -> np.ndarray:
        return grid_points(self.dim, self.n)

    def copy(self) -> "GridField":
        return GridField(self.dim, self.n, self.h, self.values.copy(), self.mask)

    def fb_threshold(self) -> float:
        return FB_THRESHOLD_FACTOR * self.h * self.h


def make_field(dim: int, n: int, data=None) -> GridField:
    """Fresh field; `data` (vectorized (N,d) -> (N,)) seeds all in-ball
    nodes and must be nonnegative on the Dirichlet ring."""
    if dim not in SUPPORTED_GRID_DIMS:
        raise ValueError(f"dim must be one of {SUPPORTED_GRID_DIMS}, got {dim}")
    if n < 5 or n % 2 == 0:
        raise ValueError(f"n must be odd and at least 5, got {n}")
    shape = (n,) * dim
    mask = _geometry(dim, n)[0]
    values = np.zeros(shape)
    if data is not None:
        raw = np.asarray(data(grid_points(dim, n)), dtype=float).reshape(shape)
        if float(raw[mask == MASK_DIRICHLET].min(initial=0.0)) < -1e-12:
            raise ValueError("boundary data must be nonnegative on the Dirichlet ring")
        values = np.maximum(raw, 0.0)
        values[mask == MASK_EXTERIOR] = 0.0
    return GridField(dim, n, 2.0 / (n - 1), values, mask)


@dataclass(frozen=True)
class SolverConfig:
    """Continuation-and-relaxation parameters for `minimize`."""

    exponent: Exponent
    delta_schedule: tuple = (1e-2, 1e-3, 1e-4, 1e-6)
    sweep_limit: int = 50_000
    residual_tol: float = 1e-8
    relaxation: float = 1.5
    check_every: int = 32
    record_energy_every: int = 0

    def __post_init__(self):
        sched = tuple(float(d) for d in self.delta_schedule)
        if not sched or any(d <= 0 for d in sched):
            raise ValueError("delta_schedule must be nonempty and positive")
        if any(b >= a for a, b in zip(sched, sched[1:])) and len(sched) > 1:
            raise ValueError("delta_schedule must be strictly decreasing")
        if not 0.0 < self.relaxation < 2.0:
            raise ValueError("relaxation must lie in (0, 2)")
        object.__setattr__(self, "delta_schedule", sched)


@dataclass
class SolveDiagnostics:
    converged: bool
    final_residual: float
    stage_sweeps: list = dataclass_field(default_factory=list)
    stage_residuals: list = dataclass_field(default_factory=list)
    stage_energies: list = dataclass_field(default_factory=list)
    stage_deltas: list = dataclass_field(default_factory=list)
    energy_trace: list = dataclass_field(default_factory=list)  # (stage, sweep, E)


def _stability_floor(exponent: Exponent, h2: float, omega: float, dim: int) -> float:
    """Smallest regularization floor keeping the node update a contraction.

    The update derivative through the reaction term has magnitude
    omega h^2 |gamma(gamma-1)| delta^(gamma-2) / (2d); requiring it <= 1/2
    gives delta >= (2 omega h^2 |gamma(gamma-1)| / (2d))^(1/(2-gamma)),
    which scales like h^beta and so never degrades the recovery order.
    """
    a = abs(exponent.gamma * (exponent.gamma - 1.0))
    if a == 0.0:
        return 0.0
    return (2.0 * omega * h2 * a / (2.0 * dim)) ** (1.0 / (2.0 - exponent.gamma))


def minimize(data, config: SolverConfig, dim: int, n: int):
    """Relaxation solve for the Dirichlet data `data`; returns
    (GridField, SolveDiagnostics).

    Non-convergence at the final continuation stage is reported in the
    diagnostics, not raised.
    """
    exp = config.exponent
    fld = make_field(dim, n, data)
    _, idx_all, nb_all, idx_r, nb_r, idx_b, nb_b = _geometry(dim, n)
    u = fld.values.ravel()
    h2 = fld.h * fld.h
    inv2d = 1.0 / (2.0 * dim)
    omega = config.relaxation
    gamma = exp.gamma
    diag = SolveDiagnostics(converged=False, final_residual=math.inf)
    floor = _stability_floor(exp, h2, omega, dim)
    res = math.inf
    for stage, delta in enumerate(config.delta_schedule):
        delta_eff = max(delta, floor)
        sweeps = 0
        res = math.inf
        while sweeps < config.sweep_limit:
            backend.sor_color_pass(u, idx_r, nb_r, gamma, delta_eff, omega, h2, inv2d)
            backend.sor_color_pass(u, idx_b, nb_b, gamma, delta_eff, omega, h2, inv2d)
            sweeps += 1
            if config.record_energy_every and sweeps % config.record_energy_every == 0:
                diag.energy_trace.append((stage, sweeps, discrete_energy(fld, exp)))
            if sweeps % config.check_every == 0 or sweeps == config.sweep_limit:
                res = backend.projected_residual(u, idx_all, nb_all, gamma,
                                                 delta_eff, h2, inv2d)
                if res <= config.residual_tol:
                    break
        diag.stage_sweeps.append(sweeps)
        diag.stage_residuals.append(res)
        diag.stage_energies.append(discrete_energy(fld, exp))
        diag.stage_deltas.append(delta_eff)
    diag.final_residual = res
    diag.converged = res <= config.residual_tol
    return fld, diag


def discrete_energy(fld: GridField, exponent: Exponent) -> float:
    """Energy [sum_faces 1/2 (face difference)^2 + sum_interior u^gamma 1_{u>0}] h^d.

    The gradient part runs over lattice faces with at least one interior
    endpoint, each once; splitting every interior-interior face between its
    two nodes, this is the forward/backward face average per interior node,
    with ring faces at full weight.  That weighting makes the energy the
    exact descent functional of the projected relaxation sweep at gamma = 1.
    """
    u = fld.values
    n, h, dim = fld.n, fld.h, fld.dim
    interior = fld.interior()
    grad_total = 0.0
    for ax in range(dim):
        dp = np.diff(u, axis=ax) / h
        left = [slice(None)] * dim
        left[ax] = slice(0, n - 1)
        right = [slice(None)] * dim
        right[ax] = slice(1, n)
        active = interior[tuple(left)] | interior[tuple(right)]
        grad_total += 0.5 * float(np.sum(dp[active] ** 2))
    ui = u[interior]
    reaction = np.where(ui > 0.0, ui ** exponent.gamma, 0.0)
    return float(h ** dim * (grad_total + np.sum(reaction)))


def _laplacian_terms(fld: GridField):
    _, idx, nb, *_ = _geometry(fld.dim, fld.n)
    u = fld.values.ravel()
    ui = u[idx]
    lap = (u[nb].sum(axis=1) - 2.0 * fld.dim * ui) / (fld.h * fld.h)
    return u, idx, nb, ui, lap


def el_residual(fld: GridField, exponent: Exponent,
                threshold: float | None = None) -> float:
    """Sup over interior nodes with u > threshold of
    |Lap_h u - gamma u^(gamma-1)|; threshold defaults to 10 h^2."""
    thr = fld.fb_threshold() if threshold is None else threshold
    _, _, _, ui, lap = _laplacian_terms(fld)
    sel = ui > thr
    if not np.any(sel):
        return 0.0
    g = exponent.gamma
    return float(np.max(np.abs(lap[sel] - g * ui[sel] ** (g - 1.0))))


def transform_field(v: GridField, exponent: Exponent) -> GridField:
    """Pointwise 2-homogenizing map u = v^(2-gamma) / (gamma (2-gamma));
    zero maps to zero and gamma = 1 is the identity."""
    g = exponent.gamma
    w = v.values ** (2.0 - g) / (g * (2.0 - g))
    return GridField(v.dim, v.n, v.h, w, v.mask)


def transformed_residual(fld: GridField, exponent: Exponent,
                         threshold: float | None = None) -> float:
    """Sup over interior nodes with u > threshold of
    |Lap_h u + ((beta-2)/2) |grad_h u|^2 / u - 1| (central gradients)."""
    thr = fld.fb_threshold() if threshold is None else threshold
    u, idx, nb, ui, lap = _laplacian_terms(fld)
    sel = ui > thr
    if not np.any(sel):
        return 0.0
    g2 = np.zeros(ui.shape)
    for a in range(fld.dim):
        ga = (u[nb[:, 2 * a + 1]] - u[nb[:, 2 * a]]) / (2.0 * fld.h)
        g2 += ga * ga
    coef = 0.5 * (exponent.beta - 2.0)
    res = lap[sel] + coef * g2[sel] / ui[sel] - 1.0
    return float(np.max(np.abs(res)))


def sample_field(fld: GridField, pts) -> np.ndarray:
    """Multilinear interpolation of the field at points inside [-1,1]^d."""
    x = np.atleast_2d(np.asarray(pts, dtype=float))
    t = (x + 1.0) / fld.h
    i0 = np.clip(np.floor(t).astype(np.int64), 0, fld.n - 2)
    f = t - i0
    u = fld.values.ravel()
    strides = np.array([fld.n ** (fld.dim - 1 - a) for a in range(fld.dim)],
                       dtype=np.int64)
    vals = np.zeros(x.shape[0])
    for corner in range(2 ** fld.dim):
        w = np.ones(x.shape[0])
        flat = np.zeros(x.shape[0], dtype=np.int64)
        for a in range(fld.dim):
            bit = (corner >> a) & 1
            w = w * (f[:, a] if bit else 1.0 - f[:, a])
            flat = flat + (i0[:, a] + bit) * strides[a]
        vals += w * u[flat]
    return vals


def sample_field_gradient(fld: GridField, pts) -> np.ndarray:
    """Gradient of the multilinear interpolant (cell-local differences).

    First-order accurate; used on the Green-identity inset sphere where
    centered node stencils would reach past the Dirichlet ring.
    """
    x = np.atleast_2d(np.asarray(pts, dtype=float))
    t = (x + 1.0) / fld.h
    i0 = np.clip(np.floor(t).astype(np.int64), 0, fld.n - 2)
    f = t - i0
    u = fld.values.ravel()
    strides = np.array([fld.n ** (fld.dim - 1 - a) for a in range(fld.dim)],
                       dtype=np.int64)
    grad = np.zeros_like(x)
    for corner in range(2 ** fld.dim):
        flat = np.zeros(x.shape[0], dtype=np.int64)
        for a in range(fld.dim):
            bit = (corner >> a) & 1
            flat = flat + (i0[:, a] + bit) * strides[a]
        uc = u[flat]
        for a in range(fld.dim):
            w = np.full(x.shape[0], 1.0 / fld.h)
            for b in range(fld.dim):
                bit = (corner >> b) & 1
                if b == a:
                    w = w * (1.0 if bit else -1.0)
                else:
                    w = w * (f[:, b] if bit else 1.0 - f[:, b])
            grad[:, a] += w * uc
    return grad


def homogeneity_defect(fld: GridField, beta: float) -> float:
    """Deviation from beta-homogeneity: max over r in {1/4, 1/2} of
    |r^(-beta) u(r x) - u(x)| at nodes with |x| <= 1/2 whose scaled image
    r x lands exactly on the lattice (so exact cones score ~0)."""
    n, dim = fld.n, fld.dim
    c = (n - 1) // 2
    coords = axis_coords(n)
    worst = 0.0
    for r, step in ((0.25, 4), (0.5, 2)):
        m = (c // 2) // step * step   # keep |x| <= 1/2
        offs = np.arange(-m, m + 1, step)
        grids = np.meshgrid(*([offs] * dim), indexing="ij")
        off = np.column_stack([g.ravel() for g in grids])
        x = coords[c + off]
        keep = np.sum(x * x, axis=1) <= 0.25 + 1e-12
        x = x[keep]
        src = np.ravel_multi_index(tuple((c + off[keep]).T), (n,) * dim)
        vals_x = fld.values.ravel()[src]
        vals_rx = sample_field(fld, r * x)
        worst = max(worst, float(np.max(np.abs(r ** (-beta) * vals_rx - vals_x),
                                        initial=0.0)))
    return worst


def contact_fraction(fld: GridField, threshold: float | None = None) -> float:
    """Fraction of interior nodes at or below the free-boundary threshold."""
    thr = fld.fb_threshold() if threshold is None else threshold
    ui = fld.values[fld.interior()]
    return float(np.count_nonzero(ui <= thr)) / ui.size


def green_identity_check(fld: GridField, cone, exponent: Exponent,
                         rule: SphereRule):
    """Both sides of the transformed-cone Green identity on the sphere of
    radius 1 - 2h:

      lhs = ((2-beta)/2) int (|grad u|^2/u)(p - |x|^2/(2d))
      rhs = int (p - |x|^2/(2d)) 1_{u=0}

    with {u=0} realized as u <= 10 h^2 and the divided integrand floored.
    Degenerate (and exact) at gamma = 1, which is rejected.
    """
    if exponent.gamma == 1.0:
        raise ValueError("the identity is vacuous at gamma = 1 (beta = 2)")
    if rule.dim != fld.dim or cone.dim != fld.dim:
        raise ValueError("field, cone and rule dimensions must agree")
    R = 1.0 - GREEN_INSET_CELLS * fld.h
    pts = R * rule.nodes
    uv = sample_field(fld, pts)
    gv = sample_field_gradient(fld, pts)
    g2 = np.sum(gv * gv, axis=1)
    pv = cone.evaluate(pts)
    wfn = pv - R * R / (2.0 * fld.dim)
    ratio = np.where(uv > KERNEL_FLOOR, g2 / np.maximum(uv, KERNEL_FLOOR), 0.0)
    contact = uv <= fld.fb_threshold()
    scale = R ** (fld.dim - 1)
    lhs = 0.5 * (2.0 - exponent.beta) * scale * float(rule.weights @ (ratio * wfn))
    rhs = scale * float(rule.weights @ (wfn * contact))
    return lhs, rhs


def linf_distance_to_cone(fld: GridField, cone) -> float:
    """Max over interior + Dirichlet nodes of |field - cone|."""
    if cone.dim != fld.dim:
        raise ValueError(f"cone dim {cone.dim} != field dim {fld.dim}")
    sel = fld.in_ball().ravel()
    pts = fld.points()[sel]
    return float(np.max(np.abs(fld.values.ravel()[sel] - cone.evaluate(pts))))


def write_field(fld: GridField, path, gamma: float) -> None:
    """Plain-text dump: header `dim n h gamma`, then one value per line in
    row-major order; decimal17 formatting round-trips bit-identically."""
    with open(path, "w") as fh:
        fh.write(f"{fld.dim} {fld.n} {fld.h:.17g} {gamma:.17g}\n")
        for v in fld.values.ravel():
            fh.write(f"{v:.17g}\n")


def read_field(path):
    """Inverse of `write_field`; returns (GridField, gamma)."""
    with open(path) as fh:
        head = fh.readline().split()
        dim, n = int(head[0]), int(head[1])
        h, gamma = float(head[2]), float(head[3])
        values = np.fromiter((float(line) for line in fh), dtype=float,
                             count=n ** dim).reshape((n,) * dim)
    mask = _geometry(dim, n)[0]
    expected_h = 2.0 / (n - 1)
    if abs(h - expected_h) > 1e-15:
        raise ValueError(f"inconsistent header spacing {h} for n = {n}")
    return GridField(dim, n, expected_h, values, mask), gamma
