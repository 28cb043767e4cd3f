import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apcones.cones import (HalfSpaceCone, ParabolaCone, SymmetricCone,
                           eval_parabola, flat_cone_eval, gradient_parabola,
                           interpolate, linf_distance_quadratics,
                           make_exponent, nearest_symmetric, symmetric_spectrum,
                           t_bar, tangential_gradient)


def bisect_c_gamma(gamma, lo=1e-8, hi=10.0, iters=200):
    """Independent oracle: solve c^(2-gamma) = (2-gamma)^2/2 by bisection."""
    target = (2.0 - gamma) ** 2 / 2.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid ** (2.0 - gamma) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestExponent:
    def test_gamma_one(self):
        exp = make_exponent(1.0)
        assert exp.beta == 2.0
        assert exp.c_gamma == 0.5

    def test_gamma_half_beta(self):
        assert make_exponent(0.5).beta == pytest.approx(4.0 / 3.0, rel=1e-15)

    def test_gamma_half_c_gamma_vs_bisection(self):
        c = make_exponent(0.5).c_gamma
        assert c == pytest.approx(bisect_c_gamma(0.5), rel=1e-12)
        assert c == pytest.approx((9.0 / 8.0) ** (2.0 / 3.0), rel=1e-12)

    @pytest.mark.parametrize("gamma", [0.6, 0.9, 1.1, 1.4])
    def test_defining_equation(self, gamma):
        exp = make_exponent(gamma)
        assert exp.c_gamma ** (2.0 - gamma) == pytest.approx(
            (2.0 - gamma) ** 2 / 2.0, rel=1e-12)

    @pytest.mark.parametrize("gamma", [0.49, 1.51, -1.0])
    def test_out_of_range(self, gamma):
        with pytest.raises(ValueError, match=r"\[0\.5, 1\.5\]"):
            make_exponent(gamma)


class TestParabolaCone:
    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            ParabolaCone([[0.5, 1e-10], [0.0, 0.5]])

    def test_rejects_bad_trace(self):
        with pytest.raises(ValueError, match="trace"):
            ParabolaCone(np.eye(2))

    def test_rejects_indefinite(self):
        with pytest.raises(ValueError, match="semidefinite"):
            ParabolaCone(np.diag([1.5, -0.5]))

    def test_eigen_cache_descending_and_reconstructs(self):
        rng = np.random.default_rng(5)
        g = rng.standard_normal((4, 4))
        a = g @ g.T
        a = 0.5 * (a + a.T) / np.trace(a)
        cone = ParabolaCone(a)
        lam, vec = cone.eigenvalues, cone.eigenvectors
        assert np.all(np.diff(lam) <= 0)
        assert np.max(np.abs((vec * lam) @ vec.T - a)) <= 1e-10

    def test_immutable_arrays(self):
        cone = ParabolaCone.radial(3)
        with pytest.raises(ValueError):
            cone.matrix[0, 0] = 2.0

    def test_eval_radial(self):
        d = 4
        cone = ParabolaCone.radial(d)
        x = np.array([0.5, -0.5, 0.5, 0.5])  # |x| = 1
        assert eval_parabola(cone, x) == pytest.approx(1.0 / (2 * d), abs=1e-15)

    def test_eval_kernel_direction(self):
        cone = ParabolaCone(np.diag([1.0, 0.0]))
        assert eval_parabola(cone, np.array([0.0, 1.0])) == 0.0

    def test_eval_hand_value(self):
        cone = ParabolaCone(np.diag([0.7, 0.3]))
        x = np.array([1.0, 1.0]) / math.sqrt(2.0)
        assert eval_parabola(cone, x) == pytest.approx(0.25, abs=1e-15)

    def test_eval_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            eval_parabola(ParabolaCone.radial(2), np.zeros(3))

    def test_two_homogeneity_exact_for_pow2_scalings(self):
        cone = ParabolaCone(np.diag([0.7, 0.3]))
        x = np.array([0.3, -0.9])
        for r in (2.0, 0.5, 0.25):
            assert eval_parabola(cone, r * x) == r * r * eval_parabola(cone, x)


class TestGradient:
    def test_radial(self):
        d = 3
        cone = ParabolaCone.radial(d)
        x = np.array([0.1, 0.2, -0.3])
        assert np.allclose(gradient_parabola(cone, x), x / d, atol=1e-16)

    def test_kernel(self):
        cone = ParabolaCone(np.diag([1.0, 0.0]))
        assert np.allclose(gradient_parabola(cone, np.array([0.0, 1.0])), 0.0)

    def test_finite_difference_oracle(self):
        rng = np.random.default_rng(11)
        g = rng.standard_normal((3, 3))
        a = g @ g.T
        cone = ParabolaCone(0.5 * (a + a.T) / np.trace(a))
        x = rng.standard_normal(3)
        h = 1e-5
        grad = gradient_parabola(cone, x)
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            fd = (eval_parabola(cone, x + e) - eval_parabola(cone, x - e)) / (2 * h)
            assert abs(fd - grad[i]) <= 1e-8


class TestTangentialGradient:
    def test_radial_is_zero(self):
        cone = ParabolaCone.radial(3)
        x = np.array([1.0, 2.0, 2.0]) / 3.0
        assert np.max(np.abs(tangential_gradient(cone, x))) <= 1e-15

    def test_eigenvector_direction(self):
        cone = ParabolaCone(np.diag([1.0, 0.0]))
        assert np.allclose(tangential_gradient(cone, np.array([1.0, 0.0])), 0.0)

    def test_hand_magnitude(self):
        cone = ParabolaCone(np.diag([1.0, 0.0]))
        x = np.array([1.0, 1.0]) / math.sqrt(2.0)
        tg = tangential_gradient(cone, x)
        assert np.linalg.norm(tg) == pytest.approx(0.5, abs=1e-14)
        assert abs(tg @ x) <= 1e-12

    def test_rejects_non_unit(self):
        with pytest.raises(ValueError, match="unit sphere"):
            tangential_gradient(ParabolaCone.radial(2), np.array([1.0, 1.0]))

    def test_homogeneity_decomposition_on_sphere(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            g = rng.standard_normal((3, 3))
            a = g @ g.T
            cone = ParabolaCone(0.5 * (a + a.T) / np.trace(a))
            x = rng.standard_normal(3)
            x /= np.linalg.norm(x)
            p = eval_parabola(cone, x)
            full = gradient_parabola(cone, x)
            tau = tangential_gradient(cone, x)
            assert full @ full == pytest.approx(4 * p * p + tau @ tau, abs=1e-10)


class TestInterpolate:
    def test_t0_is_radial(self):
        cone = ParabolaCone(np.diag([0.7, 0.3]))
        itp = interpolate(cone, 0.0)
        assert np.allclose(itp.matrix, np.eye(2) / 2, atol=1e-16)
        assert itp.is_psd

    def test_t1_is_cone(self):
        a = np.diag([0.7, 0.3])
        itp = interpolate(ParabolaCone(a), 1.0)
        assert np.allclose(itp.matrix, a, atol=1e-16)

    def test_psd_boundary_at_2p5(self):
        cone = ParabolaCone(np.diag([0.7, 0.3]))
        itp = interpolate(cone, 2.5)
        assert np.allclose(itp.matrix, np.diag([1.0, 0.0]), atol=1e-14)
        assert itp.is_psd
        assert not interpolate(cone, 2.5 + 1e-6).is_psd

    def test_trace_preserved(self):
        cone = ParabolaCone(np.diag([0.6, 0.3, 0.1]))
        for t in (0.0, 0.7, 1.0, 2.0, 4.0):
            assert np.trace(interpolate(cone, t).matrix) == pytest.approx(1.0, abs=1e-13)

    def test_negative_t_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            interpolate(ParabolaCone.radial(2), -0.1)

    def test_as_cone_raises_beyond_psd(self):
        itp = interpolate(ParabolaCone(np.diag([0.7, 0.3])), 3.0)
        with pytest.raises(ValueError, match="PSD"):
            itp.as_cone()


def bisect_t_bar(cone, hi=1e6, iters=200):
    """Oracle: largest t with lambda_min(A_t) >= 0, by bisection."""
    lo = 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        lam = mid * cone.eigenvalues + (1.0 - mid) / cone.dim
        if lam.min() >= 0.0:
            lo = mid
        else:
            hi = mid
    return lo


class TestTBar:
    def test_boundary_cone(self):
        assert t_bar(ParabolaCone(np.diag([1.0, 0.0]))) == 1.0

    def test_radial_infinite(self):
        assert t_bar(ParabolaCone.radial(3)) == math.inf

    def test_bisection_oracle(self):
        cone = ParabolaCone(np.diag([0.7, 0.3]))
        assert t_bar(cone) == pytest.approx(2.5, rel=1e-12)
        assert t_bar(cone) == pytest.approx(bisect_t_bar(cone), rel=1e-9)

    def test_at_least_one(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            g = rng.standard_normal((3, 3))
            a = g @ g.T
            cone = ParabolaCone(0.5 * (a + a.T) / np.trace(a))
            tb = t_bar(cone)
            assert tb >= 1.0
            if math.isfinite(tb):
                itp = interpolate(cone, tb)
                assert abs(itp.eigenvalues[-1]) <= 1e-10
                kernel = cone.eigenvectors[:, -1]
                assert eval_parabola(itp.as_cone(), kernel) <= 1e-12


def nearest_symmetric_bruteforce_2d(cone, n_rot=720, n_pts=400):
    """Dense oracle: minimize sup_{B1} |p - P_k o R| over k and a rotation
    grid, with the sup sampled on the unit circle (quadratics peak there)."""
    theta = np.linspace(0.0, 2.0 * np.pi, n_pts, endpoint=False)
    pts = np.column_stack([np.cos(theta), np.sin(theta)])
    pvals = cone.evaluate(pts)
    best = math.inf
    for k in (1, 2):
        for ang in np.linspace(0.0, np.pi, n_rot, endpoint=False):
            c, s = math.cos(ang), math.sin(ang)
            R = np.array([[c, s], [-s, c]])
            sym = SymmetricCone(2, k, R)
            best = min(best, float(np.max(np.abs(pvals - sym.evaluate(pts)))))
    return best


class TestNearestSymmetric:
    def test_exact_p2_in_3d(self):
        cone = ParabolaCone(np.diag([0.5, 0.5, 0.0]))
        k, _, dist = nearest_symmetric(cone)
        assert k == 2 and dist == 0.0

    def test_radial(self):
        k, _, dist = nearest_symmetric(ParabolaCone.radial(4))
        assert k == 4 and dist == 0.0

    def test_hand_value_and_bruteforce(self):
        cone = ParabolaCone(np.diag([0.6, 0.4]))
        k, rot, dist = nearest_symmetric(cone)
        assert k == 2
        assert dist == pytest.approx(0.05, abs=1e-14)
        assert dist == pytest.approx(nearest_symmetric_bruteforce_2d(cone), abs=1e-3)

    def test_rotation_reproduces_cone_at_zero_distance(self):
        rng = np.random.default_rng(2)
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        a = q @ np.diag([0.5, 0.5, 0.0]) @ q.T
        cone = ParabolaCone(0.5 * (a + a.T) / np.trace(a))
        k, rot, dist = nearest_symmetric(cone)
        assert dist <= 1e-10
        rebuilt = SymmetricCone(3, k, rot).parabola()
        assert np.max(np.abs(rebuilt.matrix - cone.matrix)) <= 1e-9

    def test_distance_zero_iff_symmetric_spectrum(self):
        rng = np.random.default_rng(8)
        for _ in range(30):
            g = rng.standard_normal((3, 3))
            a = g @ g.T
            cone = ParabolaCone(0.5 * (a + a.T) / np.trace(a))
            _, _, dist = nearest_symmetric(cone)
            spectra = [symmetric_spectrum(3, k) for k in (1, 2, 3)]
            exact = any(np.max(np.abs(cone.eigenvalues - s)) <= 1e-10 for s in spectra)
            assert (dist <= 5e-11) == exact


class TestLinfDistance:
    def test_identical(self):
        cone = ParabolaCone(np.diag([0.6, 0.4]))
        assert linf_distance_quadratics(cone, cone) == 0.0

    def test_antipodal_diagonals(self):
        a = ParabolaCone(np.diag([1.0, 0.0]))
        b = ParabolaCone(np.diag([0.0, 1.0]))
        assert linf_distance_quadratics(a, b) == pytest.approx(0.5, abs=1e-15)

    def test_against_dense_sampling(self):
        a = ParabolaCone(np.diag([0.6, 0.4]))
        b = ParabolaCone.radial(2)
        rng = np.random.default_rng(0)
        pts = rng.standard_normal((20000, 2))
        pts /= np.maximum(np.linalg.norm(pts, axis=1), 1.0)[:, None]
        dense = np.max(np.abs(a.evaluate(pts) - b.evaluate(pts)))
        dist = linf_distance_quadratics(a, b)
        assert dist == pytest.approx(0.05, abs=1e-14)
        assert dense <= dist + 1e-12
        assert dense >= dist - 1e-3

    def test_dim_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            linf_distance_quadratics(ParabolaCone.radial(2), ParabolaCone.radial(3))


class TestFlatCone:
    def test_gamma_one_value(self):
        exp = make_exponent(1.0)
        e = np.array([1.0, 0.0])
        assert flat_cone_eval(exp, e, np.array([1.0, 0.3])) == pytest.approx(0.5)

    def test_vanishes_on_half_space(self):
        exp = make_exponent(0.7)
        e = np.array([0.0, 1.0])
        pts = np.array([[0.5, -0.2], [1.0, 0.0], [-3.0, -1.0]])
        assert np.all(flat_cone_eval(exp, e, pts) == 0.0)

    def test_gamma_half_peak(self):
        exp = make_exponent(0.5)
        e = np.array([1.0])
        assert flat_cone_eval(exp, e, np.array([1.0])) == pytest.approx(
            (9.0 / 8.0) ** (2.0 / 3.0), rel=1e-12)

    def test_non_unit_direction_rejected(self):
        with pytest.raises(ValueError, match="unit"):
            flat_cone_eval(make_exponent(1.0), np.array([1.0, 1.0]), np.zeros(2))


class TestHalfSpaceAndSymmetric:
    def test_obstacle_half_space(self):
        hs = HalfSpaceCone.obstacle(np.array([0.0, 1.0]))
        assert hs.evaluate(np.array([0.3, 2.0])) == pytest.approx(2.0)
        assert hs.evaluate(np.array([0.3, -2.0])) == 0.0

    def test_transformed_flat_scale(self):
        exp = make_exponent(0.8)
        hs = HalfSpaceCone.transformed_flat(exp, np.array([1.0]))
        assert hs.scale == pytest.approx((2.0 - 0.8) / (2.0 * 0.8))

    def test_symmetric_cone_spectrum(self):
        for d, k in ((3, 1), (3, 2), (4, 3)):
            cone = SymmetricCone(d, k).parabola()
            assert np.allclose(cone.eigenvalues, symmetric_spectrum(d, k), atol=1e-14)

    def test_symmetric_k0_half_space_form(self):
        sym = SymmetricCone(2, 0)
        assert sym.evaluate(np.array([2.0, 5.0])) == pytest.approx(2.0)
        assert sym.evaluate(np.array([-1.0, 5.0])) == 0.0

    def test_rotation_must_be_orthogonal(self):
        with pytest.raises(ValueError, match="orthogonal"):
            SymmetricCone(2, 1, np.array([[1.0, 0.5], [0.0, 1.0]]))


@st.composite
def random_spectra(draw, max_dim=4):
    d = draw(st.integers(min_value=1, max_value=max_dim))
    raw = [draw(st.floats(min_value=1e-3, max_value=1.0)) for _ in range(d)]
    return np.array(raw) / np.sum(raw)


@given(random_spectra())
@settings(max_examples=60, deadline=None)
def test_gradient_bound_property(lam):
    """|grad p|^2 / p <= 2 lambda_max <= 2 at unit points with p > 0."""
    d = lam.size
    cone = ParabolaCone.from_eigenvalues(np.sort(lam)[::-1])
    rng = np.random.default_rng(0)
    x = rng.standard_normal(d)
    x /= np.linalg.norm(x)
    p = eval_parabola(cone, x)
    if p > 1e-12:
        g = gradient_parabola(cone, x)
        assert g @ g <= (2.0 * cone.eigenvalues[0] + 1e-12) * p
        assert cone.eigenvalues[0] <= 1.0 + 1e-12


@given(random_spectra(), st.floats(min_value=0.0, max_value=4.0))
@settings(max_examples=60, deadline=None)
def test_interpolate_trace_property(lam, t):
    cone = ParabolaCone.from_eigenvalues(np.sort(lam)[::-1])
    assert np.trace(interpolate(cone, t).matrix) == pytest.approx(1.0, abs=1e-12)
