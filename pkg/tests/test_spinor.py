import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asdkit import zoo
from asdkit.fields import exp_, var
from asdkit.geometry import asd_residual, hodge2_matrix, riemann_residual, sd_weyl_ratio
from asdkit.jets import SingularPointError
from asdkit.spinor import (
    ETA,
    NonNullVectorError,
    TetradFrame,
    fidx,
    gram_schmidt_frame,
    lax_integrability,
    lax_pair,
    lax_polynomial_coefficients,
    null_factorize,
    petrov_from_spinor,
    random_sl2,
    rotate_dyad,
    sigma_basis,
    sigma_identity_residual,
    spin_connection,
    spinor_from_quartic,
    spinor_sd_ratio,
    verify_tetrad,
    weyl_frame_components,
    weyl_spinors,
)
from asdkit.zoo import MissingDataError, special_lax_check


def flat_frame() -> TetradFrame:
    return zoo.build_flat().frame


class TestTetrad:
    def test_flat_frame(self):
        e = zoo.build_flat()
        rep = verify_tetrad(e.metric, e.frame, e.samples(10))
        assert rep.maxAbs == 0.0

    def test_first_heavenly_flat_case(self):
        e = zoo.build_heavenly1("w*x + z*y")
        S = e.samples(10)
        assert e.tetrad_report(S).passed
        assert riemann_residual(e.metric, S).maxAbs == 0.0

    @pytest.mark.parametrize("name", ["sfk", "heavenly2", "hyperhermitian", "ppwave", "null_kv_twisting",
                                      "twistor_example", "tod_sfk", "ooguri_vafa"])
    def test_zoo_tetrads(self, name):
        e = zoo.get_entry(name)
        assert e.tetrad_report(e.samples(10)).maxAbs <= 1e-9

    def test_frame_metric_is_eta(self):
        # g(e_i, e_j) = eps_AB eps_A'B' in the index order i = 2A + A'
        assert ETA[fidx(0, 0), fidx(1, 1)] == 1.0
        assert ETA[fidx(0, 1), fidx(1, 0)] == -1.0
        assert np.count_nonzero(ETA) == 4

    @pytest.mark.parametrize("name", ["g0", "toda_lift", "dkp_lift"])
    def test_gram_schmidt_frames(self, name):
        e = zoo.get_entry(name)
        S = e.samples(20, seed=9)
        assert verify_tetrad(e.metric, e.frame, S).maxAbs < 1e-9
        for p in S[:5]:
            assert e.frame.orientation(p) == e.metric.orientation

    def test_gram_schmidt_orientation_choice(self):
        e = zoo.get_entry("g0")
        ref = e.reference_point()
        for o in (1, -1):
            fr = gram_schmidt_frame(e.metric, ref, o)
            assert fr.orientation(ref) == o


class TestNullFactorize:
    def test_rank_one_examples(self):
        mu, nu = null_factorize([[1, 0], [0, 0]])
        np.testing.assert_array_equal(mu, [1, 0])
        np.testing.assert_array_equal(nu, [1, 0])
        mu, nu = null_factorize([[1, 1], [1, 1]])
        np.testing.assert_array_equal(mu, [1, 1])
        np.testing.assert_array_equal(nu, [1, 1])

    def test_identity_is_not_null(self):
        with pytest.raises(NonNullVectorError):
            null_factorize(np.eye(2))

    def test_zero(self):
        with pytest.raises(NonNullVectorError):
            null_factorize(np.zeros((2, 2)))

    @given(st.lists(st.floats(min_value=-5, max_value=5), min_size=4, max_size=4))
    def test_outer_products_factor(self, v):
        a, b = np.array(v[:2]), np.array(v[2:])
        V = np.outer(a, b)
        if np.max(np.abs(V)) < 1e-3:
            return
        mu, nu = null_factorize(V)
        np.testing.assert_allclose(np.outer(mu, nu), V, atol=1e-9 * (1 + np.max(np.abs(V))))


class TestSigma:
    @pytest.mark.parametrize("name", ["flat", "ppwave", "heavenly2_asd"])
    def test_identity(self, name):
        e = zoo.get_entry(name)
        assert sigma_identity_residual(e.frame, e.reference_point()) < 1e-12

    def test_flat_explicit(self):
        fr = flat_frame()
        _, sig_p = sigma_basis(fr, np.zeros(4))
        # Sigma^{0'1'} comes from e^{00'} ^ e^{11'} and e^{10'} ^ e^{01'}
        S01 = sig_p[0, 1]
        nz = {(a, b) for a, b in zip(*np.nonzero(S01)) if a < b}
        assert nz == {(0, 3), (1, 2)}
        np.testing.assert_allclose(sig_p, np.swapaxes(sig_p, 0, 1))

    @pytest.mark.parametrize("name", ["flat", "ppwave", "heavenly1", "null_kv_nontwisting"])
    def test_primed_forms_self_dual(self, name):
        e = zoo.get_entry(name)
        p = e.reference_point()
        sig_u, sig_p = sigma_basis(e.frame, p)
        S = hodge2_matrix(e.frame.metric_value(p), e.frame.orientation(p))
        for X, Y in ((0, 0), (0, 1), (1, 1)):
            np.testing.assert_allclose(np.einsum("abcd,cd->ab", S, sig_p[X, Y]), sig_p[X, Y], atol=1e-10)
            np.testing.assert_allclose(np.einsum("abcd,cd->ab", S, sig_u[X, Y]), -sig_u[X, Y], atol=1e-10)


class TestSpinConnection:
    def test_flat_vanishes(self):
        sc = spin_connection(flat_frame(), np.zeros(4))
        assert np.max(np.abs(sc.frame_connection)) < 1e-14
        assert np.max(np.abs(sc.primed)) < 1e-14 and np.max(np.abs(sc.unprimed)) < 1e-14

    def test_pp_wave(self):
        e = zoo.build_ppwave("x^2")
        sc = spin_connection(e.frame, e.reference_point() + 0.1)
        assert sc.cartan_residual < 1e-12
        assert sc.koszul_agreement < 1e-12
        assert np.max(np.abs(sc.frame_connection)) > 1e-3

    def test_conformal_rescaling_formula(self):
        # e' = exp(-phi) e for the flat coordinate frame:
        # G'[c, a, b] = exp(-phi) (delta^c_a d_b phi - eta_ab eta^cd d_d phi)
        k = np.array([0.3, -0.2, 0.5, 0.1])
        phi = sum(float(k[i]) * var(i) for i in range(4))
        fr = flat_frame().scaled(exp_(-1.0 * phi))
        p = np.array([0.1, 0.2, -0.3, 0.4])
        sc = spin_connection(fr, p)
        scale = np.exp(-k @ p)
        dphi = k  # frame derivatives of phi along the coordinate frame
        eta_inv = np.linalg.inv(ETA)
        expected = scale * (np.einsum("ca,b->cab", np.eye(4), dphi) - np.einsum("ab,cd,d->cab", ETA, eta_inv, dphi))
        np.testing.assert_allclose(sc.frame_connection, expected, atol=1e-12)
        assert sc.koszul_agreement < 1e-12

    @pytest.mark.parametrize("seed", range(3))
    def test_two_routes_agree_on_random_frames(self, seed):
        e = zoo.build_perturbed(seed)
        sc = spin_connection(e.frame, e.reference_point())
        assert sc.koszul_agreement < 1e-10
        assert sc.cartan_residual < 1e-10


class TestLaxPair:
    def test_flat(self):
        lv = lax_pair(flat_frame(), np.zeros(4), 0.7)
        np.testing.assert_allclose(lv.base[0], [1, 0.7, 0, 0])
        np.testing.assert_allclose(lv.base[1], [0, 0, 1, 0.7])
        np.testing.assert_allclose(lv.fibre, 0.0)

    def test_flat_integrable(self):
        fr = flat_frame()
        assert lax_integrability(fr, np.random.default_rng(0).uniform(-1, 1, (5, 4))).maxAbs == 0.0

    def test_hyperhermitian_lax_has_no_fibre_terms(self):
        e = zoo.get_entry("hyperhermitian")
        assert e.lax is not None
        for A in (e.lax.L0, e.lax.L1):
            assert A[-1].is_const(0.0)

    def test_second_heavenly_function_of_w_z(self):
        e = zoo.build_heavenly2_nullkahler("w^3*z + sin(w)*z^2")
        assert e.lax_report(e.samples(10)).passed

    def test_second_heavenly_curved(self):
        e = zoo.build_heavenly2_nullkahler("x^3/(y+2)^2")
        assert e.lax_report(e.samples(10)).passed

    @pytest.mark.parametrize("seed", range(3))
    def test_random_metric_fails(self, seed):
        e = zoo.build_perturbed(seed)
        S = e.samples(5)
        assert not e.lax_report(S).passed
        assert not asd_residual(e.metric, S).passed

    def test_lift_sign_matters(self):
        e = zoo.get_entry("tod_sfk")
        S = e.samples(5)
        assert lax_integrability(e.frame, S).passed
        assert not lax_integrability(e.frame, S, lift_sign=+1.0).passed

    def test_commutator_is_polynomial_in_lambda(self):
        e = zoo.build_perturbed(4)
        coeffs = lax_polynomial_coefficients(e.frame, e.reference_point(), degree=8)
        # degree at most 4 in lambda
        assert np.max(np.abs(coeffs[5:])) < 1e-8 * (1 + np.max(np.abs(coeffs)))
        assert np.max(np.abs(coeffs[4])) > 1e-3

    def test_needs_three_lambdas(self):
        with pytest.raises(ValueError):
            lax_integrability(flat_frame(), [np.zeros(4)], lambdas=[0.0, 1.0])

    @settings(max_examples=6)
    @given(st.integers(min_value=10, max_value=1000), st.floats(min_value=0.05, max_value=0.3))
    def test_lax_agrees_with_curvature_on_random_metrics(self, seed, amp):
        e = zoo.build_perturbed(seed, amplitude=amp)
        S = e.samples(3, seed=seed)
        try:
            lax = e.lax_report(S).passed
        except SingularPointError:
            return
        assert lax == asd_residual(e.metric, S).passed


class TestWeylSpinors:
    @pytest.mark.parametrize("name", ["ppwave", "heavenly2_asd", "tod_sfk", "g0"])
    def test_primed_part_vanishes_on_asd(self, name):
        e = zoo.get_entry(name)
        p = e.reference_point()
        assert spinor_sd_ratio(e.metric, e.frame, p) < 1e-10

    @pytest.mark.parametrize("seed", range(3))
    def test_two_detectors_agree(self, seed):
        e = zoo.build_perturbed(seed)
        p = e.reference_point()
        a, b = spinor_sd_ratio(e.metric, e.frame, p), sd_weyl_ratio(e.metric, p)
        assert a > 1e-3 and b > 1e-3

    def test_spinor_symmetric(self):
        e = zoo.build_ppwave("x^2")
        psi, psi_p = weyl_spinors(weyl_frame_components(e.metric, e.frame, e.reference_point()))
        for perm in ((1, 0, 2, 3), (0, 2, 1, 3), (3, 1, 2, 0)):
            np.testing.assert_allclose(psi, psi.transpose(perm), atol=1e-12)

    @settings(max_examples=20)
    @given(st.lists(st.floats(min_value=-2, max_value=2), min_size=4, max_size=4, unique=True),
           st.integers(0, 2**16))
    def test_type_invariant_under_rotation(self, roots, seed):
        roots = sorted(roots)
        if min(np.diff(roots)) < 0.05:
            return
        psi = spinor_from_quartic(np.polynomial.polynomial.polyfromroots(roots))
        L = random_sl2(np.random.default_rng(seed))
        assert abs(np.linalg.det(L) - 1.0) < 1e-12
        assert petrov_from_spinor(rotate_dyad(psi, L), tol=1e-5).petrovType == "I"

    @given(st.integers(0, 2**16))
    def test_type_n_invariant(self, seed):
        psi = spinor_from_quartic([0, 0, 0, 0, 1.0])
        L = random_sl2(np.random.default_rng(seed))
        assert petrov_from_spinor(rotate_dyad(psi, L)).petrovType == "N"


class TestSpecialLax:
    def test_interpolating_constants(self):
        rep = special_lax_check("interpolating", {"u": "2", "w": "-1", "b": 1.0, "c": 0.5})
        assert rep.maxAbs == 0.0

    def test_interpolating_dkp_limit_solution(self):
        # u = x/t, w = 0 solves u_t + b u u_x = 0 with b = 1
        assert special_lax_check("interpolating", {"u": "x/t", "w": "0", "b": 1, "c": 0}).passed
        assert not special_lax_check("interpolating", {"u": "-x/t", "w": "0", "b": 1, "c": 0}).passed

    def test_hyperhermitian(self):
        assert special_lax_check("hyperhermitian", {"Theta0": "0", "Theta1": "0"}).maxAbs == 0.0
        assert special_lax_check("hyperhermitian", {"Theta0": "0", "Theta1": "sin(w0)"}).passed
        assert not special_lax_check("hyperhermitian", {"Theta0": "p0^2*w1", "Theta1": "p1^3"}).passed

    def test_nullkahler(self):
        assert special_lax_check("nullkahler", {"Theta": "x^3/6 + x^2*w/2"}).passed
        assert not special_lax_check("nullkahler", {"Theta": "x^3/6 + x^2*w/2 + x*y^3*z"}).passed

    def test_sfk_flat(self):
        assert special_lax_check("sfk", {"Omega": "w0*v0 + w1*v1", "f": "0"}).passed

    def test_missing_data(self):
        with pytest.raises(MissingDataError):
            special_lax_check("sfk", {"Omega": "w0*v0"})

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            special_lax_check("kdv", {})
