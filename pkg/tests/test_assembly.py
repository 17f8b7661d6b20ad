"""Residual and tangent assembly against independent quadrature oracles.

The consistent tangent is checked against finite differences of the
assembled residual, dead loads against their analytic resultants, the
penalty face term against a hand-integrated affine case, and the
zero-length limit against a classical Saint Venant-Kirchhoff kernel
written independently inside the test.
"""

import numpy as np
import pytest
import scipy.sparse as sp

from gradiga.assembly import (
    DirichletBC,
    EdgeLoad,
    ElementInversionError,
    FaceTraction,
    PointDirichlet,
    System,
    TorqueTraction,
    WeakNormalDerivativeBC,
)
from gradiga.material import ToupinQuadratic
from gradiga.mesh import Patch, TableBuilder, box_patch


def _cube(n=(1, 1, 1)):
    return box_patch((2, 2, 2), n, (0.0, 0.0, 0.0), (1.0, 1.0, 1.0))


def _linear_displacement(patch, grad):
    """Control coefficients reproducing u = grad @ X exactly."""
    from gradiga.splines import greville_points

    pts = [greville_points(kv) for kv in patch.knots]
    X = np.stack(np.meshgrid(*pts, indexing="ij"), axis=-1).reshape(-1, 3)
    return (X @ np.asarray(grad).T).ravel()


class TestTrivialStates:
    def test_zero_state_zero_residual(self):
        system = System(_cube(), ToupinQuadratic(1.0, 1.0, 1.0))
        R = system.assemble(np.zeros(system.ndof))
        np.testing.assert_array_equal(R, np.zeros(system.ndof))

    def test_rigid_translation_zero_residual(self):
        system = System(
            _cube((2, 1, 1)),
            ToupinQuadratic(1.0, 1.0, 1.0),
            weak=[WeakNormalDerivativeBC("zmin")],
        )
        U = np.tile([0.3, -0.2, 0.5], system.patch.n_control)
        R = system.assemble(U)
        assert np.abs(R).max() <= 1e-12

    def test_rigid_rotation_zero_residual(self):
        # A finite rotation leaves the Green-Lagrange strain at zero, so
        # the finite-strain residual must vanish identically.
        theta = 0.4
        Q = np.array([
            [np.cos(theta), -np.sin(theta), 0.0],
            [np.sin(theta), np.cos(theta), 0.0],
            [0.0, 0.0, 1.0],
        ])
        patch = _cube((2, 1, 1))
        system = System(patch, ToupinQuadratic(1.0, 1.0, 1.0))
        U = _linear_displacement(patch, Q - np.eye(3))
        R = system.assemble(U)
        assert np.abs(R).max() <= 1e-10

    def test_mismatched_dimensions_rejected(self):
        from gradiga.splines import KnotVector

        kv = KnotVector(2, [0, 0, 0, 1, 1, 1])
        patch = Patch((kv,), np.zeros((3, 2)), np.ones(3))
        with pytest.raises(ValueError):
            System(patch, ToupinQuadratic(1.0, 1.0, 0.0))


class TestTangent:
    def test_jacobian_matches_finite_differences(self):
        rng = np.random.default_rng(20)
        system = System(
            _cube((2, 1, 1)),
            ToupinQuadratic(1.0, 1.0, 0.8),
            weak=[
                WeakNormalDerivativeBC("zmin"),
                WeakNormalDerivativeBC("xmax", components=(0, 2)),
            ],
            loads=[FaceTraction("zmax", (0.0, 0.0, 0.1))],
        )
        h = 1e-6
        for _ in range(3):
            U = 0.05 * rng.normal(size=system.ndof)
            _, K = system.assemble(U, want_jacobian=True)
            K = K.toarray()
            for j in rng.choice(system.ndof, size=8, replace=False):
                dU = np.zeros(system.ndof)
                dU[j] = h
                col = (system.assemble(U + dU) - system.assemble(U - dU)) / (
                    2 * h
                )
                scale = max(1.0, np.abs(col).max())
                assert np.abs(K[:, j] - col).max() <= 1e-6 * scale

    def test_value_part_identical_with_and_without_jacobian(self):
        rng = np.random.default_rng(21)
        system = System(
            _cube((2, 1, 1)),
            ToupinQuadratic(1.0, 1.0, 0.8),
            weak=[WeakNormalDerivativeBC("zmin")],
        )
        U = 0.05 * rng.normal(size=system.ndof)
        R_plain = system.assemble(U)
        R_dual, _ = system.assemble(U, want_jacobian=True)
        assert np.array_equal(R_plain, R_dual)

    def test_assembly_is_deterministic(self):
        rng = np.random.default_rng(22)
        system = System(_cube((2, 1, 1)), ToupinQuadratic(1.0, 1.0, 1.0))
        U = 0.05 * rng.normal(size=system.ndof)
        R1, K1 = system.assemble(U, want_jacobian=True)
        R2, K2 = system.assemble(U, want_jacobian=True)
        assert np.array_equal(R1, R2)
        assert (K1 != K2).nnz == 0

    def test_energy_hessian_is_symmetric(self):
        # Dead loads and strong constraints keep the tangent equal to
        # the Hessian of a potential, so asymmetry indicates a bug.
        rng = np.random.default_rng(23)
        system = System(
            _cube((2, 1, 1)),
            ToupinQuadratic(1.0, 1.0, 1.0),
            dirichlet=[DirichletBC("zmin", (0, 1, 2))],
            loads=[FaceTraction("zmax", (0.0, 0.0, 0.1))],
        )
        U = system.apply_constraints(0.05 * rng.normal(size=system.ndof))
        _, K = system.assemble(U, want_jacobian=True)
        K = K.toarray()
        assert np.abs(K - K.T).max() <= 1e-10 * np.abs(K).max()


class TestDeadLoads:
    def test_traction_resultant_is_area_times_traction(self):
        patch = box_patch((2, 2, 2), (2, 2, 2), (0, 0, 0), (1.0, 2.0, 3.0))
        t = np.array([0.3, -0.2, 0.5])
        system = System(
            patch, ToupinQuadratic(1.0, 1.0, 0.0),
            loads=[FaceTraction("zmax", tuple(t))],
        )
        R = system.assemble(np.zeros(system.ndof))
        area = 1.0 * 2.0
        for c in range(3):
            assert abs(R[c::3].sum() + t[c] * area) <= 1e-13

    def test_load_terms_scale_linearly(self):
        system = System(
            _cube(), ToupinQuadratic(1.0, 1.0, 0.0),
            loads=[FaceTraction("zmax", (0.0, 0.0, 1.0))],
        )
        R1 = system.assemble(np.zeros(system.ndof), scale=1.0)
        Rh = system.assemble(np.zeros(system.ndof), scale=0.5)
        np.testing.assert_allclose(Rh, 0.5 * R1, atol=1e-16)

    def test_torque_resultant_matches_polar_moment(self):
        # t = m (e3 x r) about the centroid of the unit square end face:
        # zero net force, resultant torque m times the polar moment 1/6.
        m = 0.1
        patch = box_patch((2, 2, 2), (2, 2, 4), (0, 0, 0), (1.0, 1.0, 4.0))
        system = System(
            patch, ToupinQuadratic(1.0, 1.0, 0.0),
            loads=[TorqueTraction("zmax", m)],
        )
        f = -system.assemble(np.zeros(system.ndof)).reshape(-1, 3)
        for c in range(3):
            assert abs(f[:, c].sum()) <= 1e-14
        X = patch.control.reshape(-1, 3)
        centroid = np.array([0.5, 0.5, 4.0])
        torque = np.cross(X - centroid, f).sum(axis=0)
        assert abs(torque[2] - m / 6.0) <= 1e-13
        assert abs(torque[0]) <= 1e-13 and abs(torque[1]) <= 1e-13

    def test_edge_load_support_and_resultant(self):
        L = np.array([0.0, 0.0, -1.0])
        system = System(
            _cube((2, 2, 2)), ToupinQuadratic(1.0, 1.0, 0.0),
            edge_loads=[EdgeLoad(("xmax", "zmax"), tuple(L))],
        )
        R = system.assemble(np.zeros(system.ndof))
        assert abs(R[2::3].sum() - 1.0) <= 1e-14
        # Only basis functions that are nonzero on the edge x = z = 1
        # may receive load: the interpolatory last index in x and z.
        expected = {
            ((3 * 4 + j) * 4 + 3) * 3 + 2 for j in range(4)
        }
        assert set(np.nonzero(R)[0]) == expected


class TestStrongConstraints:
    def test_constrained_dofs_pinned_to_scaled_values(self):
        system = System(
            _cube(), ToupinQuadratic(1.0, 1.0, 0.0),
            dirichlet=[DirichletBC("zmax", (2,), 0.2)],
            points=[PointDirichlet((0.0, 0.0, 0.0), (0, 1))],
        )
        idx, val = system.constrained
        assert idx.size == 9 + 2
        U = system.apply_constraints(np.zeros(system.ndof), scale=0.5)
        np.testing.assert_allclose(U[idx], 0.5 * val, atol=1e-16)
        R, K = system.assemble(U, scale=0.5, want_jacobian=True)
        np.testing.assert_allclose(R[idx], np.zeros(idx.size), atol=1e-16)
        for dof in idx:
            row = K.getrow(int(dof))
            assert row.nnz == 1 and row[0, int(dof)] == 1.0
            col = K.getcol(int(dof))
            assert col.nnz == 1

    def test_conflicting_values_rejected(self):
        with pytest.raises(ValueError, match="conflicting"):
            System(
                _cube(), ToupinQuadratic(1.0, 1.0, 0.0),
                dirichlet=[
                    DirichletBC("zmin", (0,), 0.1),
                    DirichletBC("xmin", (0,), 0.2),
                ],
            )

    def test_component_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="component"):
            System(
                _cube(), ToupinQuadratic(1.0, 1.0, 0.0),
                dirichlet=[DirichletBC("zmin", (3,))],
            )


class TestWeakNormalDerivativeTerm:
    def _penalty_residual(self, components=None, grad_scale=1.0):
        """Weak-term contribution isolated by differencing two systems."""
        gamma = grad_scale * np.array([0.2, -0.1, 0.3])
        patch = _cube()
        mat = ToupinQuadratic(1.0, 1.0, 0.7)
        kw = dict(finite=True)
        bare = System(patch, mat, **kw)
        weak = System(
            patch, mat,
            weak=[WeakNormalDerivativeBC("zmax", components=components)],
            **kw,
        )
        U = _linear_displacement(patch, np.outer(gamma, [0, 0, 1]))
        return gamma, weak.assemble(U) - bare.assemble(U)

    def test_affine_field_hand_quadrature(self):
        # u = gamma z gives Du = gamma on zmax and a zero double stress,
        # so the weak term reduces to the penalty integral
        # C mu l^2 / h * gamma_c * int_face dN_a/dz dS, separable into
        # Bernstein factors 1/3 * 1/3 * dB_k(1) with dB(1) = (0, -2, 2).
        gamma, dR = self._penalty_residual()
        pen = 5.0 * 1.0 * 0.7**2 / 1.0
        dBz1 = np.array([0.0, -2.0, 2.0])
        expected = np.zeros(dR.size)
        for i in range(3):
            for j in range(3):
                for k in range(3):
                    point = (i * 3 + j) * 3 + k
                    for c in range(3):
                        expected[point * 3 + c] = (
                            pen * gamma[c] * dBz1[k] / 9.0
                        )
        np.testing.assert_allclose(dR, expected, atol=1e-12)

    def test_component_masking(self):
        gamma, dR = self._penalty_residual(components=(2,))
        R2 = dR.reshape(-1, 3)
        assert np.abs(R2[:, 0]).max() == 0.0
        assert np.abs(R2[:, 1]).max() == 0.0
        assert np.abs(R2[:, 2]).max() > 0.0

    def test_vanishes_for_constant_field(self):
        system = System(
            _cube(), ToupinQuadratic(1.0, 1.0, 0.7),
            weak=[WeakNormalDerivativeBC("zmax")],
        )
        U = np.tile([0.1, 0.2, -0.3], system.patch.n_control)
        assert np.abs(system.assemble(U)).max() <= 1e-13


class TestClassicalLimit:
    def test_zero_length_matches_independent_svk_kernel(self):
        rng = np.random.default_rng(24)
        lam, mu = 1.2, 0.8
        patch = _cube((2, 1, 1))
        system = System(patch, ToupinQuadratic(lam, mu, 0.0))
        U = 0.05 * rng.normal(size=system.ndof)
        R = system.assemble(U)

        builder = TableBuilder(patch)
        tables = builder.volume()
        conn = builder.connectivity
        U_loc = U.reshape(-1, 3)[conn]
        grad_u = np.einsum("eai,eqaJ->eqiJ", U_loc, tables.dN)
        F = grad_u + np.eye(3)
        E = 0.5 * (np.einsum("eqiA,eqiB->eqAB", F, F) - np.eye(3))
        tr = np.trace(E, axis1=-2, axis2=-1)
        P = lam * tr[..., None, None] * F + 2 * mu * np.einsum(
            "eqiA,eqAJ->eqiJ", F, E
        )
        r = np.einsum("eqiJ,eqaJ,eq->eai", P, tables.dN, tables.wdet)
        R_ref = np.zeros(system.ndof)
        gdof = conn[:, :, None] * 3 + np.arange(3)
        np.add.at(R_ref, gdof.reshape(len(conn), -1),
                  r.reshape(len(conn), -1))
        np.testing.assert_allclose(R, R_ref, rtol=1e-12, atol=1e-14)


class TestElementInversion:
    def test_inverted_element_raises(self):
        patch = _cube()
        system = System(patch, ToupinQuadratic(1.0, 1.0, 0.0))
        U = _linear_displacement(patch, np.diag([-1.5, 0.0, 0.0]))
        with pytest.raises(ElementInversionError):
            system.assemble(U)


class TestEnergies:
    def test_uniform_strain_energy(self):
        lam, mu = 1.3, 0.9
        gamma = 0.1
        patch = _cube((2, 2, 2))
        system = System(patch, ToupinQuadratic(lam, mu, 1.0))
        U = _linear_displacement(patch, np.diag([gamma, 0.0, 0.0]))
        e11 = gamma + 0.5 * gamma**2
        local, gradient = system.energy_split(U)
        assert abs(local - (0.5 * lam + mu) * e11**2) <= 1e-14
        assert abs(gradient) <= 1e-30
        assert system.energy(U) == local + gradient

    def test_quadratic_field_gradient_energy(self):
        # Small strain with u1 = a z^2: the strain gradient is constant
        # with two nonzero entries, so the split is integrable by hand.
        a, mu, length = 0.3, 1.0, 0.5
        patch = _cube()
        system = System(
            patch, ToupinQuadratic(0.0, mu, length), finite=False
        )
        U = np.zeros(system.ndof)
        coeffs = np.zeros((3, 3, 3))
        coeffs[:, :, 2] = a
        U[0::3] = coeffs.ravel()
        local, gradient = system.energy_split(U)
        assert abs(local - 2.0 * mu * a**2 / 3.0) <= 1e-14
        assert abs(gradient - mu * length**2 * a**2) <= 1e-14