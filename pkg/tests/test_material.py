"""Constitutive laws against hand substitutions and their own energies.

The closed-form stress expressions must agree with derivatives of the
energy density, which algorithmic differentiation provides exactly.
Frame invariance and equivariance are checked with random rotations,
and the multiwell potential against its analytic stationary points.
"""

import numpy as np
import pytest

from gradiga.autodiff import Dual, value_of
from gradiga.kinematics import Kinematics, compute_kinematics
from gradiga.material import (
    MULTIWELL_ROOTS,
    MultiwellGradient1d,
    ToupinQuadratic,
    cauchy_pushforward,
    multiwell_energy_1d,
    multiwell_stress_1d,
)


def _random_state(rng, scale=0.3):
    grad_u = scale * rng.normal(size=(3, 3))
    g2 = scale * rng.normal(size=(3, 3, 3))
    g2 = 0.5 * (g2 + g2.transpose(0, 2, 1))
    return grad_u, g2


def _rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


class TestParameterValidation:
    def test_rejects_nonpositive_shear_modulus(self):
        with pytest.raises(ValueError):
            ToupinQuadratic(lam=1.0, mu=0.0, length=1.0)

    def test_rejects_negative_lame_or_length(self):
        with pytest.raises(ValueError):
            ToupinQuadratic(lam=-1.0, mu=1.0, length=1.0)
        with pytest.raises(ValueError):
            ToupinQuadratic(lam=1.0, mu=1.0, length=-1.0)

    def test_multiwell_needs_positive_length(self):
        with pytest.raises(ValueError):
            MultiwellGradient1d(mu=1.0, length=0.0)

    def test_gradient_flags(self):
        assert not ToupinQuadratic(1.0, 1.0, 0.0).needs_strain_gradient
        mat = ToupinQuadratic(1.0, 2.0, 3.0)
        assert mat.needs_strain_gradient
        assert mat.gradient_modulus == 18.0


class TestEnergyDensity:
    def test_reference_state_is_stress_free(self):
        mat = ToupinQuadratic(lam=1.0, mu=1.0, length=1.0)
        kin = compute_kinematics(np.zeros((3, 3)), np.zeros((3, 3, 3)))
        assert mat.energy_density(kin) == 0.0
        P, B = mat.stresses(kin)
        np.testing.assert_array_equal(P, np.zeros((3, 3)))
        np.testing.assert_array_equal(B, np.zeros((3, 3, 3)))

    def test_uniaxial_strain_energy(self):
        # Stretch chosen so the Green-Lagrange strain is exactly
        # diag(0.1, 0, 0); then W = lam/2 0.01 + mu 0.01 = 0.015.
        mat = ToupinQuadratic(lam=1.0, mu=1.0, length=0.0)
        grad_u = np.diag([np.sqrt(1.2) - 1.0, 0.0, 0.0])
        kin = compute_kinematics(grad_u)
        assert abs(mat.energy_density(kin) - 0.015) <= 1e-15

    def test_pure_gradient_energy(self):
        # A single strain-gradient component g contributes
        # mu l^2 g^2 / 2 = 0.5 * 1 * 4 * 0.09 = 0.18.
        mat = ToupinQuadratic(lam=0.0, mu=1.0, length=2.0)
        g2 = np.zeros((3, 3, 3))
        g2[0, 0, 0] = 0.3
        kin = compute_kinematics(np.zeros((3, 3)), g2, finite=False)
        local, gradient = mat.energy_parts(kin)
        assert local == 0.0
        assert abs(gradient - 0.18) <= 1e-15

    def test_split_sums_to_density_bitwise(self):
        rng = np.random.default_rng(10)
        grad_u, g2 = _random_state(rng)
        kin = compute_kinematics(grad_u, g2)
        mat = ToupinQuadratic(lam=1.3, mu=0.7, length=1.7)
        local, gradient = mat.energy_parts(kin)
        assert mat.energy_density(kin) == local + gradient

    def test_frame_invariance(self):
        rng = np.random.default_rng(11)
        grad_u, g2 = _random_state(rng)
        kin = compute_kinematics(grad_u, g2)
        mat = ToupinQuadratic(lam=1.0, mu=1.0, length=1.5)
        W = mat.energy_density(kin)
        for _ in range(5):
            Q = _rotation(rng)
            rot = compute_kinematics(
                Q @ (grad_u + np.eye(3)) - np.eye(3),
                np.einsum("ik,kJK->iJK", Q, g2),
            )
            assert abs(mat.energy_density(rot) - W) <= 1e-12


class TestStresses:
    def test_closed_form_matches_energy_derivative(self):
        # One seed along a random admissible direction: the derivative
        # of W must equal P contracted with the direction plus B
        # contracted with its symmetric second-gradient part.
        rng = np.random.default_rng(12)
        mat = ToupinQuadratic(lam=1.1, mu=0.9, length=1.3)
        for _ in range(10):
            grad_u, g2 = _random_state(rng)
            d_gu, d_g2 = _random_state(rng, scale=1.0)
            kin = compute_kinematics(
                Dual(grad_u, d_gu[..., None]),
                Dual(g2, d_g2[..., None]),
            )
            W = mat.energy_density(kin)
            P, B = mat.stresses(compute_kinematics(grad_u, g2))
            P, B = value_of(P), value_of(B)
            expected = (P * d_gu).sum() + (B * d_g2).sum()
            assert abs(W.dot[0] - expected) <= 1e-10 * max(1.0, abs(expected))

    def test_directional_derivative_against_finite_differences(self):
        rng = np.random.default_rng(13)
        mat = ToupinQuadratic(lam=1.0, mu=1.0, length=1.0)
        grad_u, g2 = _random_state(rng)
        d_gu, d_g2 = _random_state(rng, scale=1.0)
        P, B = mat.stresses(compute_kinematics(grad_u, g2))
        predicted = (P * d_gu).sum() + (B * d_g2).sum()
        h = 1e-6

        def W(t):
            kin = compute_kinematics(grad_u + t * d_gu, g2 + t * d_g2)
            return mat.energy_density(kin)

        fd = (W(h) - W(-h)) / (2 * h)
        assert abs(predicted - fd) <= 1e-8 * max(1.0, abs(fd))

    def test_equivariance_under_rotation(self):
        rng = np.random.default_rng(14)
        mat = ToupinQuadratic(lam=1.0, mu=1.0, length=1.5)
        grad_u, g2 = _random_state(rng)
        P, B = mat.stresses(compute_kinematics(grad_u, g2))
        for _ in range(5):
            Q = _rotation(rng)
            rot = compute_kinematics(
                Q @ (grad_u + np.eye(3)) - np.eye(3),
                np.einsum("ik,kJK->iJK", Q, g2),
            )
            P_rot, B_rot = mat.stresses(rot)
            np.testing.assert_allclose(P_rot, Q @ P, atol=1e-12)
            np.testing.assert_allclose(
                B_rot, np.einsum("ik,kJK->iJK", Q, B), atol=1e-12
            )

    def test_double_stress_trailing_symmetry(self):
        rng = np.random.default_rng(15)
        grad_u, g2 = _random_state(rng)
        mat = ToupinQuadratic(lam=1.0, mu=1.0, length=2.0)
        _, B = mat.stresses(compute_kinematics(grad_u, g2))
        assert np.array_equal(B, np.swapaxes(B, -2, -1))

    def test_double_stress_single_component(self):
        # gradE with only the 112 entry set: the symmetrized double
        # stress splits it evenly between the 112 and 121 slots.
        g = 0.3
        gradE = np.zeros((3, 3, 3))
        gradE[0, 0, 1] = g
        kin = Kinematics(
            F=np.eye(3), gradF=np.zeros((3, 3, 3)),
            E=np.zeros((3, 3)), gradE=gradE, J=1.0, finite=True,
        )
        mat = ToupinQuadratic(lam=0.0, mu=1.0, length=1.0)
        _, B = mat.stresses(kin)
        assert abs(B[0, 0, 1] - 0.5 * g) <= 1e-15
        assert abs(B[0, 1, 0] - 0.5 * g) <= 1e-15
        assert abs(B[0, 0, 1] + B[0, 1, 0] - g) <= 1e-15

    def test_zero_length_gives_saint_venant_kirchhoff(self):
        rng = np.random.default_rng(16)
        grad_u, g2 = _random_state(rng)
        kin = compute_kinematics(grad_u, g2)
        mat = ToupinQuadratic(lam=1.2, mu=0.8, length=0.0)
        P, B = mat.stresses(kin)
        assert B is None
        tr = np.trace(kin.E)
        P_svk = 1.2 * tr * kin.F + 2 * 0.8 * np.einsum(
            "iA,AJ->iJ", kin.F, kin.E
        )
        np.testing.assert_allclose(P, P_svk, atol=1e-14)


class TestCauchyPushforward:
    def test_identity_pushforward(self):
        rng = np.random.default_rng(17)
        gradE = rng.normal(size=(3, 3, 3))
        gradE = 0.5 * (gradE + gradE.transpose(1, 0, 2))
        kin = Kinematics(
            F=np.eye(3), gradF=np.zeros((3, 3, 3)),
            E=np.zeros((3, 3)), gradE=gradE, J=np.array(1.0), finite=True,
        )
        mat = ToupinQuadratic(lam=1.0, mu=1.0, length=1.0)
        P, B = mat.stresses(kin)
        sigma, beta = cauchy_pushforward(kin, P, B)
        np.testing.assert_allclose(sigma, P, atol=1e-14)
        np.testing.assert_allclose(beta, B, atol=1e-14)

    def test_pure_dilatation(self):
        alpha = 1.2
        grad_u = (alpha - 1.0) * np.eye(3)
        kin = compute_kinematics(grad_u, np.zeros((3, 3, 3)))
        assert abs(kin.J - alpha**3) <= 1e-14
        mat = ToupinQuadratic(lam=1.0, mu=1.0, length=1.0)
        P, B = mat.stresses(kin)
        sigma, _ = cauchy_pushforward(kin, P, B)
        np.testing.assert_allclose(sigma, P * alpha / alpha**3, atol=1e-14)

    def test_classical_limit_is_symmetric(self):
        rng = np.random.default_rng(18)
        grad_u, _ = _random_state(rng)
        kin = compute_kinematics(grad_u)
        mat = ToupinQuadratic(lam=1.0, mu=1.0, length=0.0)
        P, B = mat.stresses(kin)
        sigma, beta = cauchy_pushforward(kin, P, B)
        np.testing.assert_allclose(sigma, sigma.T, atol=1e-10)
        np.testing.assert_array_equal(beta, np.zeros((3, 3, 3)))
        np.testing.assert_allclose(
            sigma, np.einsum("iJ,jJ->ij", P, kin.F) / kin.J, atol=1e-14
        )


class TestMultiwell:
    def test_frozen_stationary_strains(self):
        lo, zero, hi = MULTIWELL_ROOTS
        assert zero == 0.0
        assert abs(hi - 1.8228756555322954) <= 1e-15
        assert abs(lo + 0.8228756555322954) <= 1e-15
        for root in MULTIWELL_ROOTS:
            assert abs(multiwell_stress_1d(root)) <= 1e-14

    def test_outer_wells_are_negative_minima(self):
        lo, _, hi = MULTIWELL_ROOTS
        assert multiwell_energy_1d(lo) < 0.0
        assert multiwell_energy_1d(hi) < 0.0
        assert multiwell_energy_1d(0.0) == 0.0
        assert multiwell_stress_1d(0.0) == 0.0

    def test_stress_is_energy_derivative(self):
        e = np.linspace(-1.5, 2.5, 17)
        W = multiwell_energy_1d(Dual(e, np.ones(e.shape + (1,))))
        np.testing.assert_allclose(
            W.dot[..., 0], multiwell_stress_1d(e), rtol=1e-14, atol=1e-14
        )

    def test_material_energy_and_stress_layout(self):
        mat = MultiwellGradient1d(mu=1.0, length=0.02)
        grad_u = np.zeros((3, 3))
        grad_u[0, 0] = 1.2
        g2 = np.zeros((3, 3, 3))
        g2[0, 0, 0] = 4.0
        kin = compute_kinematics(grad_u, g2, finite=False)
        local, gradient = mat.energy_parts(kin)
        assert abs(local - multiwell_energy_1d(1.2)) <= 1e-15
        assert abs(gradient - 0.5 * 0.02**2 * 16.0) <= 1e-15
        P, B = mat.stresses(kin)
        assert abs(P[0, 0] - multiwell_stress_1d(1.2)) <= 1e-15
        assert abs(B[0, 0, 0] - 0.02**2 * 4.0) <= 1e-15
        assert np.count_nonzero(P) == 1
        assert np.count_nonzero(B) == 1

    def test_rejects_finite_strain(self):
        mat = MultiwellGradient1d(mu=1.0, length=0.02)
        g2 = np.zeros((3, 3, 3))
        kin = compute_kinematics(0.1 * np.eye(3), g2, finite=True)
        with pytest.raises(ValueError):
            mat.stresses(kin)