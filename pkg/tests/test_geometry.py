import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asdkit import zoo
from asdkit.fields import const
from asdkit.geometry import (
    MetricField,
    asd_residual,
    classify_quartic,
    conformal_killing_residual,
    curvature_pack,
    hodge2_matrix,
    hodge_star2,
    kahler_form_closure,
    laplace_beltrami,
    levi_civita,
    ricci_flat_residual,
    riemann_residual,
    scalar_flat_residual,
    sd_weyl_ratio,
    split_weyl_tensor,
    weyl_residual,
    weyl_split,
)
from asdkit.geometry import PetrovIndeterminate, quartic_hessian, quartic_invariants
from asdkit.spinor import (
    petrov_classify,
    petrov_from_spinor,
    quartic_from_spinor,
    random_sl2,
    rotate_dyad,
    spinor_from_quartic,
)
from asdkit.zoo import STANDARD_J

NAMES = ("x0", "x1", "x2", "x3")
ETA = np.diag([1.0, 1.0, -1.0, -1.0])


def constant_metric(G, orientation: int = 1) -> MetricField:
    G = np.asarray(G, float)
    return MetricField(tuple(tuple(const(float(G[i, j])) for j in range(4)) for i in range(4)), NAMES,
                       orientation=orientation)


def flat_diag() -> MetricField:
    return constant_metric(ETA)


@st.composite
def neutral_matrices(draw):
    """``P^T diag(1, 1, -1, -1) P`` for a well-conditioned random ``P``."""
    vals = draw(st.lists(st.floats(min_value=-0.4, max_value=0.4), min_size=16, max_size=16))
    P = np.eye(4) + np.array(vals).reshape(4, 4)
    return P.T @ ETA @ P


def two_forms(rng, k=1):
    out = []
    for _ in range(k):
        A = rng.normal(size=(4, 4))
        out.append(A - A.T)
    return out


def hodge_brute_force(G, F, orientation=1):
    """``(*F)_ab = 1/2 eps_abcd F^cd`` by explicit loops."""
    Gi = np.linalg.inv(G)
    Fu = Gi @ F @ Gi.T
    vol = orientation * np.sqrt(abs(np.linalg.det(G)))
    out = np.zeros((4, 4))
    for a, b, c, d in itertools.product(range(4), repeat=4):
        s = levi_civita(4)[a, b, c, d]
        if s:
            out[a, b] += 0.5 * vol * s * Fu[c, d]
    return out


class TestCurvature:
    def test_flat_diagonal(self):
        g = flat_diag()
        pack = curvature_pack(g, np.zeros(4))
        assert np.max(np.abs(pack.riemann)) == 0.0
        assert pack.scalar == 0.0

    def test_g0_scalar_flat_and_conformally_flat(self):
        g = zoo.get_entry("g0").metric
        pack = curvature_pack(g, np.zeros(4))
        assert abs(pack.scalar) < 1e-12
        assert np.max(np.abs(pack.weyl)) <= 1e-9
        # not flat: each sphere factor carries curvature
        assert np.max(np.abs(pack.riemann)) > 0.1
        S = g.samples(20, seed=1)
        assert weyl_residual(g, S).passed
        assert scalar_flat_residual(g, S).passed
        assert not riemann_residual(g, S).passed

    @pytest.mark.parametrize("name", ["ooguri_vafa", "tod_sfk", "null_kv_twisting", "perturbed"])
    def test_bianchi_and_weyl_trace(self, name):
        e = zoo.build_perturbed(3) if name == "perturbed" else zoo.get_entry(name)
        for p in e.samples(4, seed=2):
            pack = curvature_pack(e.metric, p)
            assert pack.bianchi_residual() < 1e-10
            assert pack.weyl_trace_residual() < 1e-10
            R = pack.riemann_down
            np.testing.assert_allclose(R, -R.transpose(1, 0, 2, 3), atol=1e-9)
            np.testing.assert_allclose(R, R.transpose(2, 3, 0, 1), atol=1e-9)

    def test_ricci_flat_on_pp_wave(self):
        g = zoo.build_ppwave("x^2 + y^2").metric
        assert ricci_flat_residual(g, g.samples(20)).passed

    def test_sphere_factors(self):
        # Ric is the round metric on each factor, so it equals g on one and -g on the other
        g = zoo.get_entry("g0").metric
        p = np.array([0.2, -0.1, 0.3, 0.4])
        ric, G = curvature_pack(g, p).ricci, g.value(p)
        assert ric[0, 0] == pytest.approx(G[0, 0], rel=1e-10)
        assert ric[2, 2] == pytest.approx(-G[2, 2], rel=1e-10)


class TestHodge:
    def test_flat_brute_force(self):
        g = flat_diag()
        F = np.zeros((4, 4))
        F[0, 1], F[1, 0] = 1.0, -1.0
        star = hodge_star2(g, np.zeros(4), F)
        np.testing.assert_allclose(star, hodge_brute_force(ETA, F), atol=1e-14)
        # only the (2, 3) component survives
        mask = np.ones((4, 4), bool)
        mask[2, 3] = mask[3, 2] = False
        assert np.all(star[mask] == 0.0)
        assert abs(star[2, 3]) == 1.0

    @given(neutral_matrices(), st.integers(0, 2**16))
    def test_matches_brute_force(self, G, seed):
        (F,) = two_forms(np.random.default_rng(seed))
        np.testing.assert_allclose(np.einsum("abcd,cd->ab", hodge2_matrix(G), F), hodge_brute_force(G, F),
                                   atol=1e-9)

    @given(neutral_matrices())
    def test_involution_in_neutral_signature(self, G):
        S = hodge2_matrix(G).reshape(16, 16)
        (F,) = two_forms(np.random.default_rng(0))
        twice = (S @ (S @ F.ravel())).reshape(4, 4)
        np.testing.assert_allclose(twice, F, atol=1e-9)

    @given(neutral_matrices(), st.floats(min_value=0.2, max_value=5.0))
    def test_conformal_invariance(self, G, c):
        np.testing.assert_allclose(hodge2_matrix(c * G), hodge2_matrix(G), atol=1e-9)

    @given(neutral_matrices())
    def test_orientation_reverses(self, G):
        np.testing.assert_allclose(hodge2_matrix(G, -1), -hodge2_matrix(G, 1), atol=1e-12)


class TestWeylSplit:
    def test_flat_parts_vanish(self):
        Cp, Cm = weyl_split(flat_diag(), np.zeros(4))
        assert np.max(np.abs(Cp)) == 0.0 and np.max(np.abs(Cm)) == 0.0

    def test_pp_wave_is_anti_self_dual(self):
        g = zoo.build_ppwave("x^2 + y^2").metric
        p = g.samples(3, seed=0)[0]
        Cp, Cm = weyl_split(g, p)
        assert np.max(np.abs(Cp)) <= 1e-9
        assert np.max(np.abs(Cm)) > 1e-3

    def test_curved_first_heavenly(self):
        g = zoo.build_heavenly1("w*x + z*y + x^2*z^3").metric
        for p in g.samples(5, seed=1):
            Cp, Cm = weyl_split(g, p)
            assert np.max(np.abs(Cp)) <= 1e-9
            assert np.max(np.abs(Cm)) > 1e-3

    def test_parts_are_eigenforms(self):
        e = zoo.build_perturbed(1)
        pack = curvature_pack(e.metric, np.zeros(4))
        Cp, Cm = split_weyl_tensor(pack.metric, pack.weyl, e.metric.orientation)
        S = hodge2_matrix(pack.metric, e.metric.orientation)
        np.testing.assert_allclose(np.einsum("abef,efcd->abcd", S, Cp), Cp, atol=1e-10)
        np.testing.assert_allclose(np.einsum("abef,efcd->abcd", S, Cm), -Cm, atol=1e-10)


class TestASDResidual:
    def test_g0(self):
        g = zoo.get_entry("g0").metric
        assert asd_residual(g, g.samples(20)).maxAbs < 1e-12

    def test_twistor_example_constant(self):
        e = zoo.build_twistor_example(0.3, 0.0)
        assert asd_residual(e.metric, e.samples(30)).maxAbs <= 1e-8

    @pytest.mark.parametrize("seed", range(3))
    def test_random_perturbation_detected(self, seed):
        e = zoo.build_perturbed(seed)
        assert asd_residual(e.metric, e.samples(10)).maxAbs > 1e-3

    def test_ratio_is_orientation_sensitive(self):
        # the pp-wave is ASD for its orientation and not for the opposite one
        g = zoo.build_ppwave("x^2 + y^2").metric
        p = g.samples(2)[0]
        flipped = MetricField(g.components, g.names, orientation=-g.orientation, box=g.box)
        assert sd_weyl_ratio(g, p) < 1e-12
        assert sd_weyl_ratio(flipped, p) > 1e-3


class TestPetrovQuartic:
    @pytest.mark.parametrize(
        "roots, expected",
        [
            ([0, 1, 2, 3], "I"),
            ([1, 1, 2, 3], "II"),
            ([1, 1, -2, -2], "D"),
            ([0.5, 0.5, 0.5, 3], "III"),
            ([-1, -1, -1, -1], "N"),
        ],
    )
    def test_real_root_patterns(self, roots, expected):
        coeffs = np.polynomial.polynomial.polyfromroots(roots)
        q = classify_quartic(coeffs)
        assert q.petrovType == expected
        assert q.allRootsReal

    def test_zero_is_type_o(self):
        assert classify_quartic(np.zeros(5)).petrovType == "O"

    def test_complex_roots_recorded(self):
        q = classify_quartic([1.0, 0.0, 0.0, 0.0, 1.0])  # 1 + x^4
        assert q.petrovType == "I"
        assert not q.allRootsReal

    def test_root_at_infinity(self):
        # x(x-1)(x-2) as a binary quartic has a simple root at infinity
        coeffs = list(np.polynomial.polynomial.polyfromroots([0, 1, 2])) + [0.0]
        q = classify_quartic(coeffs)
        assert q.petrovType == "I"
        assert q.multiplicities == (1, 1, 1, 1)

    def test_type_n_at_infinity(self):
        assert classify_quartic([1.0, 0.0, 0.0, 0.0, 0.0]).petrovType == "N"

    @given(st.lists(st.floats(min_value=-3, max_value=3), min_size=5, max_size=5))
    def test_spinor_round_trip(self, c):
        np.testing.assert_allclose(quartic_from_spinor(spinor_from_quartic(c)), c, atol=1e-12)

    @given(st.sampled_from([((0, 0, 1, 2.5), "II"), ((-1, -1, 1.5, 1.5), "D"), ((0.3, 0.3, 0.3, -1), "III"),
                            ((0.7,) * 4, "N")]),
           st.integers(0, 2**16))
    def test_degenerate_types_under_rotation(self, case, seed):
        roots, expected = case
        psi = spinor_from_quartic(np.polynomial.polynomial.polyfromroots(roots))
        L = random_sl2(np.random.default_rng(seed))
        assert petrov_from_spinor(rotate_dyad(psi, L)).petrovType == expected

    @given(st.lists(st.floats(min_value=-2, max_value=2), min_size=5, max_size=5), st.integers(0, 2**16))
    def test_invariants_under_sl2(self, c, seed):
        psi = spinor_from_quartic(c)
        I, J = quartic_invariants(c)
        I2, J2 = quartic_invariants(quartic_from_spinor(rotate_dyad(psi, random_sl2(np.random.default_rng(seed)))))
        assert I2 == pytest.approx(I, abs=1e-9 * (1 + abs(I)) * 100)
        assert J2 == pytest.approx(J, abs=1e-9 * (1 + abs(J)) * 1000)

    def test_hessian_of_fourth_power_vanishes(self):
        # (x - 2)^4
        c = np.polynomial.polynomial.polyfromroots([2.0] * 4)
        np.testing.assert_allclose(quartic_hessian(c), 0.0, atol=1e-9)

    @pytest.mark.parametrize("roots", [[0, 1, 2, 3], [1, 1, 2, 3], [1, 1, -2, -2], [0.5, 0.5, 0.5, 3]])
    def test_roots_reproduce_coefficients(self, roots):
        coeffs = np.polynomial.polynomial.polyfromroots(roots)
        q = classify_quartic(coeffs)
        rebuilt = np.polynomial.polynomial.polyfromroots(
            [r for r, m in zip(q.roots, q.multiplicities) for _ in range(m)])
        np.testing.assert_allclose(rebuilt.real, coeffs, atol=1e-5)

    def test_noise_above_zero_tolerance_is_indeterminate(self):
        g0 = zoo.get_entry("g0")
        with pytest.raises(PetrovIndeterminate):
            petrov_classify(g0.metric, g0.frame, g0.reference_point(), zero_tol=1e-16)

    def test_zoo_types(self):
        g0 = zoo.get_entry("g0")
        assert petrov_classify(g0.metric, g0.frame, g0.reference_point()).petrovType == "O"
        pp = zoo.build_ppwave("x^2")
        assert petrov_classify(pp.metric, pp.frame, pp.reference_point()).petrovType == "N"


class TestKillingAndKahler:
    def test_twistor_example_homothety(self):
        e = zoo.build_twistor_example(0.3, 0.0)
        for p in e.samples(5):
            res, c = conformal_killing_residual(e.metric, e.killing, p)
            assert res < 1e-10
            assert np.isfinite(c)

    def test_g0_rotation_is_killing(self):
        e = zoo.get_entry("g0")
        res, c = conformal_killing_residual(e.metric, e.killing, e.reference_point())
        assert res < 1e-12 and abs(c) < 1e-12

    def test_g0_kahler_form_closed(self):
        e = zoo.get_entry("g0")
        for p in e.samples(5):
            assert kahler_form_closure(e.metric, STANDARD_J, p) < 1e-12

    def test_non_killing_detected(self):
        e = zoo.get_entry("g0")
        res, _ = conformal_killing_residual(e.metric, (1.0, 0.0, 0.0, 0.0), np.array([0.3, 0.1, 0.2, 0.0]))
        assert res > 1e-2

    def test_laplacian_flat(self):
        from asdkit.fields import parse_expr

        f = parse_expr("x0^2 - x2^2 + 3*x1*x3", NAMES)
        # diag(1, 1, -1, -1): d00 - d22 of x0^2 - x2^2 gives 2 + 2
        assert laplace_beltrami(flat_diag(), f, np.zeros(4)) == pytest.approx(4.0)
