"""Pure-NumPy implementations of the hot kernels.

Mirrors `_kernels.pyx` exactly in semantics; the compiled module is
preferred at import time when available (see `backend`).
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def q_node_pass(y2, w, lam_t, lam, inv2d, floor):
    """One reduction pass over quadrature nodes for the cone-interpolation
    integrals.

    y2[i, j] are the squared coordinates of node i in the cone eigenbasis.
    Returns (qd, t1, t2, t3, sdd) where, writing p_t = (y2 @ lam_t)/2,
    g2_t = y2 @ lam_t^2 and p, g2 for the untranslated spectrum:

      qd  = sum w (g2_t / p_t)(p_t - inv2d)          [floored]
      t1  = sum w (g2 - 4 p^2)                        (tangential gradient sq.)
      t2  = sum w (p - inv2d)^2
      t3  = sum w (g2 - 4 p^2) / p_t                  [floored]
      sdd = sum w (g2 - 4 p^2)(p - inv2d)^2 / p_t^3   [floored]

    Nodes with p_t <= floor contribute zero to the divided sums (the kernel
    set has measure zero and the integrands stay bounded).
    """
    pt = 0.5 * (y2 @ lam_t)
    g2t = y2 @ (lam_t * lam_t)
    p = 0.5 * (y2 @ lam)
    g2 = y2 @ (lam * lam)
    tau2 = g2 - 4.0 * p * p
    dev = p - inv2d
    t1 = float(w @ tau2)
    t2 = float(w @ (dev * dev))
    ok = pt > floor
    inv_pt = np.zeros_like(pt)
    np.divide(1.0, pt, out=inv_pt, where=ok)
    qd = float(w @ (g2t * inv_pt * (pt - inv2d)))
    t3 = float(w @ (tau2 * inv_pt))
    sdd = float(w @ (tau2 * dev * dev * inv_pt ** 3))
    return qd, t1, t2, t3, sdd


def sor_color_pass(u, idx, nb, gamma, delta, omega, h2, inv_twod):
    """One projected SOR half-sweep over the nodes of one checkerboard color.

    Update per node: target = (sum of neighbors - h^2 * rhs) / (2 d) with
    rhs = gamma * max(u, delta)^(gamma-1), over-relaxed by omega and clamped
    at zero.  Nodes of one color never neighbor each other, so the updates
    within a pass are order-independent.
    """
    s = u[nb].sum(axis=1)
    ui = u[idx]
    rhs = gamma * np.maximum(ui, delta) ** (gamma - 1.0)
    target = (s - h2 * rhs) * inv_twod
    u[idx] = np.maximum((1.0 - omega) * ui + omega * target, 0.0)


def projected_residual(u, idx, nb, gamma, delta, h2, inv_twod):
    """Sup of the projected fixed-point residual, in units of the equation:
    (2d/h^2) |clamp(target) - u|.  Zero at obstacle-consistent nodes."""
    s = u[nb].sum(axis=1)
    ui = u[idx]
    rhs = gamma * np.maximum(ui, delta) ** (gamma - 1.0)
    target = (s - h2 * rhs) * inv_twod
    proj = np.maximum(target, 0.0)
    if ui.size == 0:
        return 0.0
    return float(np.max(np.abs(proj - ui))) / (h2 * inv_twod)
