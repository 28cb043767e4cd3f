import math

import numpy as np
import pytest
from scipy.integrate import quad

from apcones.cones import ParabolaCone
from apcones.sphere import (MIN_LEVEL, QuadratureError, build_rule, integrate,
                            richardson_error, surface_area, wallis)


def monte_carlo_moment(d, f, n=10_000_000, seed=0):
    """MC oracle for (1/area) int f: uniform sphere points via normals."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d))
    x /= np.linalg.norm(x, axis=1)[:, None]
    return surface_area(d) * float(np.mean(f(x)))


class TestBuildRule:
    @pytest.mark.parametrize("d", [1, 2, 3, 4, 5])
    def test_weight_sum_is_area(self, d):
        rule = build_rule(d, 8)
        assert float(rule.weights.sum()) == pytest.approx(surface_area(d),
                                                          rel=1e-10)

    def test_d2_circumference_tight(self):
        rule = build_rule(2, 11)
        assert abs(float(rule.weights.sum()) - 2 * math.pi) <= 1e-12

    @pytest.mark.parametrize("d", [2, 3, 4, 5])
    def test_nodes_unit_and_weights_positive(self, d):
        rule = build_rule(d, 7)
        assert np.max(np.abs(np.linalg.norm(rule.nodes, axis=1) - 1.0)) <= 1e-12
        assert np.all(rule.weights > 0)

    @pytest.mark.parametrize("d", [2, 3, 4, 5])
    @pytest.mark.parametrize("level", [5, 8])
    def test_exactly_antipodal(self, d, level):
        rule = build_rule(d, level)
        nodes = rule.nodes
        order = np.lexsort(nodes.T)
        mirror = np.lexsort((-nodes).T)
        assert np.array_equal(nodes[order], -nodes[mirror])
        assert np.allclose(rule.weights[order], rule.weights[mirror], rtol=0, atol=0)

    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_second_moment_identity(self, d):
        rule = build_rule(d, 16)
        area = surface_area(d)
        second = rule.nodes.T * rule.weights @ rule.nodes
        assert np.max(np.abs(second - np.eye(d) * area / d)) <= 1e-8 * area

    def test_x1_squared_3d_closed_form_and_monte_carlo(self):
        rule = build_rule(3, 16)
        val = integrate(rule, lambda x: x[:, 0] ** 2)
        assert val == pytest.approx(4 * math.pi / 3, abs=1e-10)
        mc = monte_carlo_moment(3, lambda x: x[:, 0] ** 2, n=2_000_000)
        assert val == pytest.approx(mc, rel=3e-3)

    def test_even_monomial_exactness(self):
        # closed-form sphere moments: int x^a = 2 prod Gamma((a_i+1)/2) / Gamma((|a|+d)/2)
        def moment(d, alpha):
            if any(a % 2 for a in alpha):
                return 0.0
            num = 2.0 * np.prod([math.gamma((a + 1) / 2.0) for a in alpha])
            return num / math.gamma((sum(alpha) + d) / 2.0)

        for d, alpha in [(2, (4, 2)), (3, (2, 2, 2)), (3, (6, 0, 0)),
                         (4, (2, 0, 2, 4)), (5, (2, 2, 0, 0, 2))]:
            rule = build_rule(d, 12)
            val = integrate(rule, lambda x: np.prod(x ** np.array(alpha), axis=1))
            assert val == pytest.approx(moment(d, alpha), rel=1e-8, abs=1e-12)

    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_odd_monomials_vanish(self, d):
        rule = build_rule(d, 8)
        assert abs(integrate(rule, lambda x: x[:, 0] ** 3)) <= 1e-10
        assert abs(integrate(rule, lambda x: x[:, 0] * x[:, -1] ** 2)) <= 1e-10

    def test_unsupported_dim(self):
        with pytest.raises(ValueError, match=r"\(1, 2, 3, 4, 5\)"):
            build_rule(6, 8)

    def test_level_too_small(self):
        with pytest.raises(ValueError, match=str(MIN_LEVEL)):
            build_rule(2, 3)

    def test_d1_counting_rule(self):
        rule = build_rule(1, 8)
        assert rule.nodes.tolist() == [[-1.0], [1.0]]
        assert rule.weights.tolist() == [1.0, 1.0]


class TestIntegrate:
    def test_constant(self):
        rule = build_rule(3, 8)
        assert integrate(rule, lambda x: np.ones(len(x))) == pytest.approx(
            4 * math.pi, rel=1e-12)

    def test_harmonic_deviation_integrates_to_zero(self):
        # p - P_d is a 2-homogeneous harmonic polynomial for any unit-trace cone
        rule = build_rule(3, 12)
        cone = ParabolaCone(np.diag([0.6, 0.3, 0.1]))
        radial = ParabolaCone.radial(3)
        val = integrate(rule, lambda x: cone.evaluate(x) - radial.evaluate(x))
        assert abs(val) <= 1e-12

    def test_directional_second_moment_vs_monte_carlo(self):
        rule = build_rule(3, 16)
        e = np.array([1.0, 2.0, -2.0]) / 3.0
        val = integrate(rule, lambda x: (x @ e) ** 2)
        assert val == pytest.approx(surface_area(3) / 3, rel=1e-10)
        mc = monte_carlo_moment(3, lambda x: (x @ e) ** 2, n=2_000_000, seed=4)
        assert val == pytest.approx(mc, rel=3e-3)

    def test_pointwise_callable(self):
        rule = build_rule(2, 8)
        val = integrate(rule, lambda x: float(x[0] ** 2))
        assert val == pytest.approx(math.pi, rel=1e-12)

    def test_linearity(self):
        rule = build_rule(3, 8)
        f = lambda x: x[:, 0] ** 2
        g = lambda x: np.abs(x[:, 1])
        a, b = 2.5, -1.25
        combined = integrate(rule, lambda x: a * f(x) + b * g(x))
        split = a * integrate(rule, f) + b * integrate(rule, g)
        assert combined == pytest.approx(split, abs=1e-12 * surface_area(3))

    def test_failure_names_node_index(self):
        rule = build_rule(2, 8)

        def bad(x):
            if x.ndim == 2:
                raise RuntimeError("no vectorized path")
            if x[1] > 0.99:  # fails near the north pole node
                raise RuntimeError("boom")
            return 0.0

        with pytest.raises(QuadratureError, match=r"node \d+"):
            integrate(rule, bad)


class TestRichardson:
    def test_decreases_with_level_for_smooth(self):
        f = lambda x: np.exp(x[:, 0]) * x[:, 1] ** 2
        lo_pair = richardson_error(build_rule(3, 4), build_rule(3, 8), f)
        hi_pair = richardson_error(build_rule(3, 8), build_rule(3, 16), f)
        assert hi_pair <= lo_pair

    def test_constant_is_exact(self):
        f = lambda x: np.ones(len(x))
        assert richardson_error(build_rule(3, 8), build_rule(3, 16), f) <= 1e-12

    def test_level_ratio_enforced(self):
        with pytest.raises(ValueError, match="twice"):
            richardson_error(build_rule(2, 8), build_rule(2, 12), lambda x: x[:, 0])


class TestWallis:
    def test_base_cases(self):
        assert wallis(0) == math.pi
        assert wallis(1) == 2.0

    def test_w2(self):
        assert abs(wallis(2) - math.pi / 2) <= 1e-15

    def test_w5_closed_form(self):
        assert wallis(5) == pytest.approx(16.0 / 15.0, rel=1e-14)

    @pytest.mark.parametrize("m", range(2, 13))
    def test_recursion(self, m):
        assert wallis(m) == pytest.approx((m - 1) / m * wallis(m - 2), rel=1e-14)

    @pytest.mark.parametrize("m", [0, 3, 6, 11])
    def test_quadrature_oracle(self, m):
        val, _ = quad(lambda s: math.cos(s) ** m, -math.pi / 2, math.pi / 2)
        assert wallis(m) == pytest.approx(val, rel=1e-10)

    def test_negative_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            wallis(-1)
