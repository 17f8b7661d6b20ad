"""Strain-energy densities and the stresses they induce.

Two constitutive models are provided. :class:`ToupinQuadratic` is a
Saint Venant-Kirchhoff energy extended by a quadratic strain-gradient
term with one internal length; with zero length it reduces to plain
Saint Venant-Kirchhoff. :class:`MultiwellGradient1d` is a nonconvex
quartic in the axial strain regularized by the same kind of gradient
term, used for the phase-separating bar.

Every method accepts Dual inputs, so the same expressions provide both
stresses and their consistent linearization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Dual, ein, value_of
from .kinematics import Kinematics

__all__ = [
    "ToupinQuadratic",
    "MultiwellGradient1d",
    "multiwell_energy_1d",
    "multiwell_stress_1d",
    "MULTIWELL_ROOTS",
    "cauchy_pushforward",
]

# Stationary strains of the multiwell density: dW/dE = E^3 - E^2 - 1.5 E
# factors as E (E^2 - E - 3/2), so the outer wells sit at (1 +- sqrt(7))/2.
MULTIWELL_ROOTS = (
    (1.0 - np.sqrt(7.0)) / 2.0,
    0.0,
    (1.0 + np.sqrt(7.0)) / 2.0,
)


@dataclass(frozen=True)
class ToupinQuadratic:
    """Quadratic strain energy with a quadratic strain-gradient term.

    W = lam/2 (tr E)^2 + mu E:E + mu l^2/2 GradE:GradE

    Parameters
    ----------
    lam : float
        First Lame parameter, may be zero.
    mu : float
        Shear modulus, positive.
    length : float
        Internal length l scaling the gradient stiffness, zero or
        positive. Zero recovers the Saint Venant-Kirchhoff material.
    """

    lam: float
    mu: float
    length: float

    def __post_init__(self):
        if self.mu <= 0.0:
            raise ValueError("shear modulus must be positive")
        if self.lam < 0.0 or self.length < 0.0:
            raise ValueError("lam and length must be non-negative")

    @property
    def needs_strain_gradient(self) -> bool:
        """Whether the energy actually reads GradE."""
        return self.mu * self.length**2 > 0.0

    @property
    def gradient_modulus(self) -> float:
        """Rigidity mu l^2 of the strain-gradient term.

        Sets the scale of the double stress and of the penalty that
        enforces normal-derivative boundary conditions weakly.
        """
        return self.mu * self.length**2

    def energy_parts(self, kin: Kinematics):
        """Local and gradient energy densities, separately."""
        tr = ein("...AA->...", kin.E)
        ee = ein("...AB,...AB->...", kin.E, kin.E)
        local = 0.5 * self.lam * tr * tr + self.mu * ee
        if not self.needs_strain_gradient:
            return local, np.zeros(value_of(local).shape)
        gg = ein("...ABC,...ABC->...", kin.gradE, kin.gradE)
        gradient = 0.5 * self.mu * self.length**2 * gg
        return local, gradient

    def energy_density(self, kin: Kinematics):
        local, gradient = self.energy_parts(kin)
        return local + gradient

    def stresses(self, kin: Kinematics):
        """First Piola stress P and double stress B.

        P[i, J] is conjugate to the displacement gradient and B[i, J, K]
        to its gradient; B is returned symmetric in its trailing pair,
        the representative that matters under symmetric second
        variations. Without a gradient term B is None and P carries no
        second-gradient contribution, so callers can skip that work.
        """
        tr = ein("...AA->...", kin.E)
        P = self.lam * ein("...,...iJ->...iJ", tr, kin.F) + 2.0 * self.mu * ein(
            "...iA,...AJ->...iJ", kin.F, kin.E
        )
        if not self.needs_strain_gradient:
            return P, None
        ml2 = self.mu * self.length**2
        P = P + ml2 * ein("...iAC,...AJC->...iJ", kin.gradF, kin.gradE)
        B = ml2 * ein("...iA,...AJK->...iJK", kin.F, kin.gradE)
        B = 0.5 * (B + _swap(B))
        return P, B


@dataclass(frozen=True)
class MultiwellGradient1d:
    """Nonconvex quartic energy in the axial strain with gradient penalty.

    W = E^4/4 - E^3/3 - 3 E^2/4 + mu l^2/2 (E')^2

    applied to the 11 strain component of an axially embedded bar. The
    local part has wells at the outer roots of E^3 - E^2 - 3E/2, so a
    bar pinned at both ends decomposes into two strain phases joined by
    an interface whose width scales with l.
    """

    mu: float
    length: float

    def __post_init__(self):
        if self.mu <= 0.0:
            raise ValueError("gradient modulus must be positive")
        if self.length <= 0.0:
            raise ValueError(
                "the multiwell energy needs a positive internal length"
            )

    @property
    def needs_strain_gradient(self) -> bool:
        return True

    @property
    def gradient_modulus(self) -> float:
        return self.mu * self.length**2

    def energy_parts(self, kin: Kinematics):
        e = kin.E[..., 0, 0]
        g = kin.gradE[..., 0, 0, 0]
        local = multiwell_energy_1d(e)
        gradient = 0.5 * self.mu * self.length**2 * g * g
        return local, gradient

    def energy_density(self, kin: Kinematics):
        local, gradient = self.energy_parts(kin)
        return local + gradient

    def stresses(self, kin: Kinematics):
        if kin.finite:
            raise ValueError(
                "the multiwell bar is a small-strain model; its stresses "
                "are conjugate to the linearized strain only"
            )
        e = kin.E[..., 0, 0]
        g = kin.gradE[..., 0, 0, 0]
        sigma = multiwell_stress_1d(e)
        beta = self.mu * self.length**2 * g
        shape = value_of(e).shape
        if isinstance(e, Dual):
            P = Dual.zeros(shape + (3, 3), e.nseed)
            B = Dual.zeros(shape + (3, 3, 3), e.nseed)
        else:
            P = np.zeros(shape + (3, 3))
            B = np.zeros(shape + (3, 3, 3))
        P[..., 0, 0] = sigma
        B[..., 0, 0, 0] = beta
        return P, B


def multiwell_energy_1d(e):
    """Quartic double-well density E^4/4 - E^3/3 - 3 E^2/4."""
    e2 = e * e
    return 0.25 * e2 * e2 - e2 * e / 3.0 - 0.75 * e2


def multiwell_stress_1d(e):
    """Derivative of the multiwell density, E^3 - E^2 - 3 E / 2."""
    return e * e * e - e * e - 1.5 * e


def cauchy_pushforward(kin: Kinematics, P, B):
    """True stress and double stress in the deformed configuration.

    sigma_ij = (P_iJ F_jJ + B_iJK F_jJ,K) / J
    beta_ijk = B_iJK F_jJ F_kK / J

    Post-processing only; inputs are plain arrays. A None double stress
    (material without a gradient term) gives beta = 0.
    """
    F = value_of(kin.F)
    J = value_of(kin.J)
    P = value_of(P)
    sigma = np.einsum("...iJ,...jJ->...ij", P, F) / J[..., None, None]
    if B is None:
        return sigma, np.zeros(sigma.shape + (3,))
    gradF = value_of(kin.gradF)
    B = value_of(B)
    sigma = sigma + (
        np.einsum("...iJK,...jJK->...ij", B, gradF) / J[..., None, None]
    )
    beta = (
        np.einsum("...iJK,...jJ,...kK->...ijk", B, F, F)
        / J[..., None, None, None]
    )
    return sigma, beta


def _swap(B):
    """Swap the trailing index pair of an array or Dual."""
    if isinstance(B, Dual):
        return B.swap(-2, -1)
    return np.swapaxes(B, -2, -1)
