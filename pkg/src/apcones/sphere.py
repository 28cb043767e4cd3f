"""Quadrature on unit spheres S^(d-1) for d in 1..5, plus Wallis integrals.

Rules are tensor products: a 4*level-point trapezoid rule on the circle
(spectrally accurate for periodic integrands) and, for each extra
dimension, a level-point Gauss rule in u = sin(theta) whose weight
(1-u^2)^((d-3)/2) is the polar-angle Jacobian.  That Gauss-Jacobi choice
makes the rule exactly integrate polynomials up to degree 2*level-1 in
the polar variable.  Node sets are antipodally symmetric by construction
(generate half, mirror), which kills all odd moments exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

SUPPORTED_DIMS = (1, 2, 3, 4, 5)
MIN_LEVEL = 4


class QuadratureError(RuntimeError):
    """Raised when an integrand cannot be evaluated at a rule's nodes."""


@dataclass(frozen=True)
class SphereRule:
    """Nodes and positive weights summing to the surface area of S^(d-1)."""

    dim: int
    nodes: np.ndarray        # (N, d), unit points
    weights: np.ndarray      # (N,), positive
    level: int
    exactness_degree: int

    def __len__(self) -> int:
        return self.weights.size


def surface_area(dim: int) -> float:
    """Surface area of S^(d-1): 2 pi^(d/2) / Gamma(d/2)."""
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _polar_factor(level: int, dim: int):
    """Symmetrized Gauss nodes/weights for int f(u) (1-u^2)^((d-3)/2) du."""
    a = (dim - 3) / 2.0
    u, w = roots_jacobi(level, a, a)
    order = np.argsort(u)
    u, w = u[order], w[order]
    # exact antipodal symmetry: average mirror weights, rebuild from one half
    w = 0.5 * (w + w[::-1])
    half = level // 2
    u_pos = u[level - half:]
    w_pos = w[level - half:]
    w_zero = w[half] if level % 2 else None
    return u_pos, w_pos, w_zero


def build_rule(dim: int, level: int) -> SphereRule:
    """Construct the quadrature rule for S^(d-1) at the given resolution.

    d = 1 is the two-point counting rule on {-1, +1}; d = 2 uses 4*level
    equispaced angles; d >= 3 stacks polar Gauss factors on the d-1 rule.
    """
    if dim not in SUPPORTED_DIMS:
        raise ValueError(f"dim must be one of {SUPPORTED_DIMS}, got {dim}")
    if level < MIN_LEVEL:
        raise ValueError(f"level must be at least {MIN_LEVEL}, got {level}")

    if dim == 1:
        nodes = np.array([[-1.0], [1.0]])
        weights = np.array([1.0, 1.0])
        degree = 2 * level - 1
    elif dim == 2:
        m = 4 * level
        theta = 2.0 * math.pi * np.arange(m // 2) / m
        half = np.column_stack([np.cos(theta), np.sin(theta)])
        nodes = np.vstack([half, -half])
        weights = np.full(m, 2.0 * math.pi / m)
        degree = 4 * level - 1
    else:
        base = build_rule(dim - 1, level)
        u_pos, w_pos, w_zero = _polar_factor(level, dim)
        blocks, wblocks = [], []
        for u0, wu in zip(u_pos[::-1], w_pos[::-1]):  # descending from the pole
            c = math.sqrt((1.0 - u0) * (1.0 + u0))
            block = np.empty((len(base), dim))
            block[:, :-1] = c * base.nodes
            block[:, -1] = u0
            blocks.append(block)
            wblocks.append(wu * base.weights)
        if w_zero is not None:
            block = np.empty((len(base), dim))
            block[:, :-1] = base.nodes
            block[:, -1] = 0.0
            blocks.append(block)
            wblocks.append(w_zero * base.weights)
        upper = np.vstack(blocks)
        wupper = np.concatenate(wblocks)
        if w_zero is None:
            nodes = np.vstack([upper, -upper])
            weights = np.concatenate([wupper, wupper])
        else:
            mirror = np.vstack(blocks[:-1])
            nodes = np.vstack([upper, -mirror])
            weights = np.concatenate([wupper, np.concatenate(wblocks[:-1])])
        degree = 2 * level - 1

    return SphereRule(dim, _frozen(nodes), _frozen(weights), level, degree)


def _evaluate(rule: SphereRule, f) -> np.ndarray:
    n = len(rule)
    try:
        vals = np.asarray(f(rule.nodes), dtype=float)
        if vals.shape == (n,):
            return vals
    except Exception:
        pass
    # pointwise fallback; also locates the failing node for the error message
    out = np.empty(n)
    for i in range(n):
        try:
            out[i] = float(f(rule.nodes[i]))
        except Exception as exc:
            raise QuadratureError(f"integrand evaluation failed at node {i}: {exc}") from exc
    return out


def integrate(rule: SphereRule, f) -> float:
    """Apply the rule to f, given either vectorized ((N,d) -> (N,)) or
    pointwise ((d,) -> scalar)."""
    return float(rule.weights @ _evaluate(rule, f))


def richardson_error(rule_lo: SphereRule, rule_hi: SphereRule, f) -> float:
    """Two-level error estimate |I_hi - I_lo| attached to the fine value."""
    if rule_hi.level < 2 * rule_lo.level:
        raise ValueError(
            f"rule_hi.level must be at least twice rule_lo.level "
            f"({rule_hi.level} < 2*{rule_lo.level})")
    return abs(integrate(rule_hi, f) - integrate(rule_lo, f))


def wallis(m: int) -> float:
    """Cosine moment W_m = int_{-pi/2}^{pi/2} cos^m, by the two-term
    recursion W_m = ((m-1)/m) W_{m-2} from W_0 = pi, W_1 = 2."""
    if m < 0:
        raise ValueError(f"m must be nonnegative, got {m}")
    if m == 0:
        return math.pi
    if m == 1:
        return 2.0
    w_even, w_odd = math.pi, 2.0
    for k in range(2, m + 1):
        if k % 2 == 0:
            w_even *= (k - 1) / k
        else:
            w_odd *= (k - 1) / k
    return w_even if m % 2 == 0 else w_odd
