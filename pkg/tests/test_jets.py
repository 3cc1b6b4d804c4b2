import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asdkit import jets
from asdkit.fields import (
    ExpressionError,
    ScalarField,
    fd_crosscheck,
    jet_eval,
    parse_expr,
    to_string,
)
from asdkit.jets import ArrayJet, DomainError, Jet2, SingularPointError

X4 = ("x0", "x1", "x2", "x3")
XYT = ("x", "y", "t")
TOD_EU = "4*(1 - t^2)/(1 + x^2 + y^2)^2"

finite = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)
points4 = st.lists(finite, min_size=4, max_size=4).map(np.array)


class TestOracles:
    def test_bilinear(self):
        j = jet_eval(ScalarField.parse("x0*x1", X4), [2, 3, 0, 0])
        assert j.value == 6.0
        np.testing.assert_array_equal(j.grad, [3, 2, 0, 0])
        assert j.hess[0, 1] == 1.0 and j.hess[1, 0] == 1.0
        assert j.hess[0, 0] == 0.0

    def test_exp_identity(self):
        j = jet_eval(ScalarField.parse("exp(x0)", X4), np.zeros(4))
        assert j.value == 1.0
        np.testing.assert_array_equal(j.grad, [1, 0, 0, 0])
        assert j.hess[0, 0] == 1.0

    def test_tod_toda_exponential(self):
        j = jet_eval(ScalarField.parse(TOD_EU, XYT), [0.0, 0.0, 0.0])
        assert j.value == pytest.approx(4.0, abs=1e-14)
        assert j.hess[2, 2] == pytest.approx(-8.0, abs=1e-13)
        # x-curvature: 4 d^2/dx^2 (1 + x^2)^-2 = -16 at the origin
        assert j.hess[0, 0] == pytest.approx(-16.0, abs=1e-13)
        np.testing.assert_allclose(j.grad, 0.0, atol=1e-15)

    def test_log_of_tod_field(self):
        u = ScalarField.parse(f"ln({TOD_EU})", XYT)
        j = u.jet([0.0, 0.0, 0.5])
        assert j.value == pytest.approx(math.log(3.0))
        assert j.grad[2] == pytest.approx(-2 * 0.5 / 0.75)


class TestFDCrosscheck:
    def test_polynomial(self):
        f = ScalarField.parse("x0^2*x1 - 3*x2*x3 + x1^2", X4)
        assert fd_crosscheck(f, [0.3, -0.2, 0.5, 0.1]).discrepancy < 1e-8

    def test_exponential(self):
        f = ScalarField.parse("exp(x0 - 2*x1)*sin(x3)", X4)
        assert fd_crosscheck(f, [0.1, 0.2, 0.3, 0.4], h=1e-3).discrepancy < 1e-5

    def test_tod_field(self):
        f = ScalarField.parse(TOD_EU, XYT)
        assert fd_crosscheck(f, [0.1, 0.2, 0.3], h=1e-3).discrepancy < 1e-5

    def test_rejects_nonpositive_step(self):
        with pytest.raises(ValueError):
            fd_crosscheck(ScalarField.parse("x0", X4), np.zeros(4), h=0.0)

    @given(points4)
    def test_random_trig_points(self, p):
        f = ScalarField.parse("sin(x0*x1) + cos(x2 - x3)^2 + x0*x3^3", X4)
        assert fd_crosscheck(f, p).discrepancy < 1e-5


class TestErrors:
    def test_singular_dkp_solution(self):
        f = ScalarField.parse("-x/t", XYT)
        with pytest.raises(SingularPointError):
            f.jet([0.3, 0.0, 0.0])

    def test_log_of_negative(self):
        with pytest.raises(SingularPointError):
            ScalarField.parse("ln(x)", XYT).jet([-1.0, 0.0, 0.0])

    def test_outside_box(self):
        f = ScalarField.parse("x*y", XYT, box=((-1, 1), (-1, 1), (-1, 1)))
        with pytest.raises(DomainError):
            f.jet([2.0, 0.0, 0.0])

    def test_wrong_arity(self):
        with pytest.raises(DomainError):
            ScalarField.parse("x*y", XYT).jet([1.0, 2.0])

    @pytest.mark.parametrize("text", ["x +", "foo(x)", "x ** ", "(x", "q*x"])
    def test_parse_errors(self, text):
        with pytest.raises(ExpressionError):
            parse_expr(text, XYT)


class TestJetAlgebra:
    @given(finite, finite)
    def test_product_rule(self, a, b):
        u = Jet2(a, np.array([1.0, 0.5]), np.array([[0.2, 0.1], [0.1, -0.3]]))
        v = Jet2(b, np.array([-0.4, 2.0]), np.array([[1.0, 0.0], [0.0, 0.5]]))
        w = u * v
        np.testing.assert_allclose(w.grad, a * v.grad + b * u.grad)
        expected = a * v.hess + b * u.hess + np.outer(u.grad, v.grad) + np.outer(v.grad, u.grad)
        np.testing.assert_allclose(w.hess, expected)
        np.testing.assert_allclose(w.hess, w.hess.T)

    @given(st.floats(min_value=0.2, max_value=3.0))
    def test_chain_rule_exp_log(self, x):
        u = Jet2.variable(x, 0, 1)
        r = jets.exp(jets.log(u))
        assert r.value == pytest.approx(x)
        assert r.grad[0] == pytest.approx(1.0)
        assert r.hess[0, 0] == pytest.approx(0.0, abs=1e-12)

    @given(st.floats(min_value=0.3, max_value=3.0))
    def test_reciprocal(self, x):
        u = Jet2.variable(x, 0, 1)
        r = 1.0 / u
        assert r.grad[0] == pytest.approx(-1 / x**2)
        assert r.hess[0, 0] == pytest.approx(2 / x**3)

    def test_sqrt_of_negative(self):
        with pytest.raises(SingularPointError):
            jets.sqrt(Jet2.constant(-1.0, 2))

    @given(points4)
    def test_expression_jets_are_symmetric(self, p):
        f = ScalarField.parse("x0*sin(x1)*exp(x2) + x3^3*x0", X4)
        j = f.jet(p)
        np.testing.assert_allclose(j.hess, j.hess.T, atol=1e-12)

    def test_array_inverse_derivative(self):
        rng = np.random.default_rng(0)
        val = np.eye(3) + 0.2 * rng.normal(size=(3, 3))
        d1 = rng.normal(size=(3, 3, 2))
        A = ArrayJet(val, d1)
        Ai = A.inv()
        # d(A A^-1) = 0
        prod = np.einsum("abi,bc->aci", d1, Ai.val) + np.einsum("ab,bci->aci", val, Ai.d1)
        np.testing.assert_allclose(prod, 0.0, atol=1e-12)


class TestParsing:
    def test_round_trip(self):
        e = parse_expr("w*x + z*y + x^3", ("x", "y", "w", "z"))
        f1 = ScalarField(e, ("x", "y", "w", "z"))
        f2 = ScalarField(parse_expr(to_string(e, ("x", "y", "w", "z")), ("x", "y", "w", "z")), f1.names)
        p = [0.3, -0.7, 1.1, 0.2]
        assert f1(p) == pytest.approx(f2(p))

    def test_vectorised_values(self):
        f = ScalarField.parse("x*y + t", XYT)
        X, Y, T = np.meshgrid(np.linspace(0, 1, 3), np.linspace(0, 1, 4), np.linspace(0, 1, 2), indexing="ij")
        np.testing.assert_allclose(f.values([X, Y, T]), X * Y + T)

    def test_restrict(self):
        f = ScalarField.parse("x*y + t", XYT).restrict(("x", "t"), {"y": 2.0})
        assert f([1.5, 0.5]) == pytest.approx(3.5)

    def test_derivative_field(self):
        f = ScalarField.parse("x^2*t", XYT)
        assert f.d("x", "t")([0.7, 0.0, 3.0]) == pytest.approx(1.4)
