"""Closed-form cone families for the Alt-Phillips / obstacle-problem zoo.

The central object is the parabola cone p(x) = 1/2 x.Ax with A symmetric,
positive semidefinite and of unit trace.  Everything spectral (interpolation
toward the radial cone, the degeneration parameter, distances to the
symmetric cones P_k) is computed from an eigendecomposition cached at
construction.  All objects are immutable after construction and safe to
share across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

GAMMA_RANGE = (0.5, 1.5)

SYMMETRY_TOL = 1e-14       # max |A - A^T| accepted at construction
TRACE_TOL = 1e-12
PSD_TOL = 1e-12            # eigenvalue floor: lambda_min >= -PSD_TOL
RECONSTRUCT_TOL = 1e-10    # eigendecomposition must rebuild A this well
UNIT_POINT_TOL = 1e-12     # sphere points for tangential gradients
DIRECTION_TOL = 1e-12      # unit directions of half-space cones
ROTATION_TOL = 1e-12       # orthogonality of rotation matrices
T_BAR_INF_TOL = 1e-13      # spectral gap below which t_bar is infinite
SPECTRUM_MATCH_TOL = 1e-10 # exact-hit threshold for symmetric spectra


@dataclass(frozen=True)
class Exponent:
    """Exponent bookkeeping: gamma, its homogeneity degree beta = 2/(2-gamma)
    and the flat-cone coefficient solving c^(2-gamma) = (2-gamma)^2/2."""

    gamma: float
    beta: float
    c_gamma: float


def make_exponent(gamma: float) -> Exponent:
    """Build the derived constants for one exponent gamma in [1/2, 3/2]."""
    if not GAMMA_RANGE[0] <= gamma <= GAMMA_RANGE[1]:
        raise ValueError(
            f"gamma must lie in [{GAMMA_RANGE[0]}, {GAMMA_RANGE[1]}], got {gamma}")
    gamma = float(gamma)
    beta = 2.0 / (2.0 - gamma)
    c_gamma = ((2.0 - gamma) ** 2 / 2.0) ** (1.0 / (2.0 - gamma))
    return Exponent(gamma, beta, c_gamma)


def _freeze(*arrays: np.ndarray) -> None:
    for a in arrays:
        a.setflags(write=False)


class ParabolaCone:
    """Quadratic cone 1/2 x.Ax, A symmetric PSD with trace 1.

    Eigenvalues are stored in descending order with matching eigenvector
    columns; every spectral operation uses this cache.
    """

    __slots__ = ("dim", "matrix", "eigenvalues", "eigenvectors")

    def __init__(self, matrix) -> None:
        A = np.array(matrix, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise ValueError(f"matrix must be square and nonempty, got shape {A.shape}")
        asym = float(np.max(np.abs(A - A.T)))
        if asym > SYMMETRY_TOL:
            raise ValueError(f"matrix is not symmetric: max|A-A^T| = {asym:.3e}")
        tr = float(np.trace(A))
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"matrix must have unit trace, got {tr!r}")
        lam, vec = np.linalg.eigh(A)
        lam = np.ascontiguousarray(lam[::-1])
        vec = np.ascontiguousarray(vec[:, ::-1])
        if lam[-1] < -PSD_TOL:
            raise ValueError(
                f"matrix is not positive semidefinite: lambda_min = {lam[-1]:.3e}")
        # accepted eigenvalue noise in [-PSD_TOL, 0) is projected onto the PSD
        # cone: downstream 1/p integrands amplify even 1e-16 of negative mass
        np.maximum(lam, 0.0, out=lam)
        recon = float(np.max(np.abs((vec * lam) @ vec.T - A)))
        if recon > RECONSTRUCT_TOL:
            raise ValueError(f"eigendecomposition failed to reconstruct A ({recon:.3e})")
        _freeze(A, lam, vec)
        self.dim = int(A.shape[0])
        self.matrix = A
        self.eigenvalues = lam
        self.eigenvectors = vec

    @classmethod
    def from_eigenvalues(cls, eigenvalues, rotation=None) -> "ParabolaCone":
        """Cone with the given spectrum; `rotation` maps cone frame to
        ambient frame (matrix = R^T diag R), identity if omitted."""
        lam = np.asarray(eigenvalues, dtype=float)
        d = lam.size
        if rotation is None:
            A = np.diag(lam)
        else:
            R = np.asarray(rotation, dtype=float)
            A = R.T @ np.diag(lam) @ R
            A = 0.5 * (A + A.T)
        return cls(A)

    @classmethod
    def radial(cls, dim: int) -> "ParabolaCone":
        """The fully radial cone |x|^2 / (2 dim)."""
        return cls(np.eye(dim) / dim)

    def evaluate(self, x):
        return eval_parabola(self, x)

    def __repr__(self) -> str:
        spectrum = ", ".join(f"{v:.6g}" for v in self.eigenvalues)
        return f"ParabolaCone(dim={self.dim}, spectrum=[{spectrum}])"


class HalfSpaceCone:
    """Cone scale * [(x.e)_+]^2 vanishing on the half-space {x.e <= 0}."""

    __slots__ = ("dim", "direction", "scale")

    def __init__(self, direction, scale: float) -> None:
        e = np.array(direction, dtype=float)
        if e.ndim != 1 or e.size < 1:
            raise ValueError("direction must be a vector")
        if abs(float(np.linalg.norm(e)) - 1.0) > DIRECTION_TOL:
            raise ValueError("direction must be a unit vector")
        if not scale > 0.0:
            raise ValueError(f"scale must be positive, got {scale}")
        _freeze(e)
        self.dim = int(e.size)
        self.direction = e
        self.scale = float(scale)

    @classmethod
    def obstacle(cls, direction) -> "HalfSpaceCone":
        """Half-space solution of the obstacle problem, scale 1/2."""
        return cls(direction, 0.5)

    @classmethod
    def transformed_flat(cls, exponent: Exponent, direction) -> "HalfSpaceCone":
        """Image of the flat Alt-Phillips cone under the 2-homogeneous
        transform: scale (2-gamma)/(2 gamma)."""
        g = exponent.gamma
        return cls(direction, (2.0 - g) / (2.0 * g))

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        s = np.maximum(x @ self.direction, 0.0)
        out = self.scale * s * s
        return float(out) if x.ndim == 1 else out


class SymmetricCone:
    """P_k composed with a rotation: radial in a k-dimensional subspace and
    invariant across it.  k = 0 is the half-space form 1/2 [(x.e)_+]^2."""

    __slots__ = ("dim", "k", "rotation")

    def __init__(self, dim: int, k: int, rotation=None) -> None:
        if not 0 <= k <= dim:
            raise ValueError(f"k must lie in 0..{dim}, got {k}")
        if rotation is None:
            R = np.eye(dim)
        else:
            R = np.array(rotation, dtype=float)
            if R.shape != (dim, dim):
                raise ValueError(f"rotation must be {dim}x{dim}, got {R.shape}")
            defect = float(np.max(np.abs(R @ R.T - np.eye(dim))))
            if defect > ROTATION_TOL:
                raise ValueError(f"rotation is not orthogonal (defect {defect:.3e})")
        _freeze(R)
        self.dim = int(dim)
        self.k = int(k)
        self.rotation = R

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        y = x @ self.rotation.T
        if self.k == 0:
            s = np.maximum(y[..., 0], 0.0)
            out = 0.5 * s * s
        else:
            out = np.sum(y[..., : self.k] ** 2, axis=-1) / (2.0 * self.k)
        return float(out) if x.ndim == 1 else out

    def parabola(self) -> ParabolaCone:
        """The associated quadratic cone; only defined for k >= 1."""
        if self.k == 0:
            raise ValueError("the half-space form k=0 is not a quadratic cone")
        lam = np.zeros(self.dim)
        lam[: self.k] = 1.0 / self.k
        return ParabolaCone.from_eigenvalues(lam, self.rotation)


def _check_point(cone: ParabolaCone, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != cone.dim:
        raise ValueError(f"point dimension {x.shape[-1]} != cone dimension {cone.dim}")
    return x


def eval_parabola(cone: ParabolaCone, x):
    """Evaluate 1/2 x.Ax at one point (d,) or a batch (N, d)."""
    x = _check_point(cone, x)
    ax = x @ cone.matrix
    out = 0.5 * np.sum(ax * x, axis=-1)
    return float(out) if x.ndim == 1 else out


def gradient_parabola(cone: ParabolaCone, x):
    """Gradient Ax of the quadratic cone, batched like eval_parabola."""
    x = _check_point(cone, x)
    return x @ cone.matrix


def tangential_gradient(cone: ParabolaCone, x) -> np.ndarray:
    """Component of the gradient tangent to the unit sphere at a unit point:
    Ax - (x.Ax) x."""
    x = _check_point(cone, x)
    if x.ndim != 1:
        raise ValueError("tangential_gradient expects a single point")
    r = float(np.linalg.norm(x))
    if abs(r - 1.0) > UNIT_POINT_TOL:
        raise ValueError(f"point must lie on the unit sphere, |x| = {r!r}")
    g = cone.matrix @ x
    return g - float(x @ g) * x


@dataclass(frozen=True)
class Interpolation:
    """One point of the trace-preserving segment A_t = t A + (1-t) I/d.

    `is_psd` flags whether A_t is still a valid cone matrix; the segment
    leaves the PSD cone at the degeneration parameter (see `t_bar`).
    """

    t: float
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    is_psd: bool

    def as_cone(self) -> ParabolaCone:
        if not self.is_psd:
            raise ValueError(f"interpolated matrix is not PSD at t = {self.t}")
        return ParabolaCone(self.matrix)


def interpolate(cone: ParabolaCone, t: float) -> Interpolation:
    """Interpolate the cone toward the radial one: A_t = t A + (1-t) I/d.

    Trace 1 is preserved for every t >= 0; the eigenbasis is shared with
    the parent cone and eigenvalues map affinely, so no new factorization
    is needed.
    """
    if t < 0.0:
        raise ValueError(f"t must be nonnegative, got {t}")
    d = cone.dim
    lam = t * cone.eigenvalues + (1.0 - t) / d
    A_t = t * cone.matrix + ((1.0 - t) / d) * np.eye(d)
    A_t = 0.5 * (A_t + A_t.T)
    lam = np.ascontiguousarray(lam)
    _freeze(A_t, lam)
    return Interpolation(float(t), A_t, lam, cone.eigenvectors,
                         bool(lam[-1] >= -PSD_TOL))


def t_bar(cone: ParabolaCone) -> float:
    """Largest t keeping A_t positive semidefinite.

    Equals (1/d) / (1/d - lambda_min); infinite for the radial cone, and
    always >= 1 for a valid cone.  Eigenvalues at roundoff scale count as
    zero so rank-deficient cones get exactly 1.
    """
    d = cone.dim
    lam_min = max(float(cone.eigenvalues[-1]), 0.0)
    if lam_min < 1e-14:
        lam_min = 0.0
    gap = 1.0 / d - lam_min
    if gap <= T_BAR_INF_TOL:
        return math.inf
    return max(1.0, (1.0 / d) / gap)


def symmetric_spectrum(dim: int, k: int) -> np.ndarray:
    """Descending spectrum of P_k: 1/k with multiplicity k, then zeros."""
    if not 1 <= k <= dim:
        raise ValueError(f"k must lie in 1..{dim}, got {k}")
    lam = np.zeros(dim)
    lam[:k] = 1.0 / k
    return lam


class NearestSymmetric(NamedTuple):
    k: int
    rotation: np.ndarray
    distance: float


def nearest_symmetric(cone: ParabolaCone) -> NearestSymmetric:
    """Closest symmetric cone P_k (over k and rotations) in the sup norm on
    the unit ball.

    Sorted-spectrum matching is optimal here: for quadratics the sup
    distance is half the spectral radius of the difference, minimized by
    aligning sorted eigenbases.  The returned rotation R satisfies
    p ~ P_k o R.
    """
    d = cone.dim
    lam = cone.eigenvalues
    best_k, best_dist = 1, math.inf
    for k in range(1, d + 1):
        dist = 0.5 * float(np.max(np.abs(lam - symmetric_spectrum(d, k))))
        if dist < best_dist:
            best_k, best_dist = k, dist
    R = cone.eigenvectors.T.copy()
    if np.linalg.det(R) < 0.0:
        R[-1] *= -1.0  # P_k is even in each frame coordinate, so this is free
    _freeze(R)
    return NearestSymmetric(best_k, R, best_dist)


def linf_distance_quadratics(a: ParabolaCone, b: ParabolaCone) -> float:
    """sup over the unit ball of |p_a - p_b|: half the spectral radius of
    the matrix difference."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} != {b.dim}")
    return 0.5 * float(np.max(np.abs(np.linalg.eigvalsh(a.matrix - b.matrix))))


def flat_cone_eval(exponent: Exponent, e, x):
    """Flat Alt-Phillips cone c_gamma [(x.e)_+]^beta for a unit direction e."""
    e = np.asarray(e, dtype=float)
    if abs(float(np.linalg.norm(e)) - 1.0) > DIRECTION_TOL:
        raise ValueError("e must be a unit vector")
    x = np.asarray(x, dtype=float)
    s = np.maximum(x @ e, 0.0)
    out = exponent.c_gamma * s ** exponent.beta
    return float(out) if x.ndim == 1 else out
