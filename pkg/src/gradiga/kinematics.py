"""Strain measures for first and second displacement gradients.

Inputs are batches of 3x3 displacement gradients and 3x3x3 second
gradients in referential indices. Lower-dimensional problems are embedded
by zero padding before calling in here, so a single set of formulas covers
every case. All operations go through Dual-aware arithmetic, which is what
lets the assembly differentiate residuals through these kinematics.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Dual, det3, ein, value_of

__all__ = ["Kinematics", "compute_kinematics", "IDENTITY3"]

IDENTITY3 = np.eye(3)


class Kinematics:
    """Deformation measures at a batch of material points.

    Attributes
    ----------
    F : deformation gradient, indices [i, J]
    gradF : referential gradient of F, indices [i, J, K]
    E : Green-Lagrange strain (finite) or symmetric gradient (small)
    gradE : referential strain gradient, indices [A, B, C]
    J : determinant of F (identically one in the small-strain branch)
    finite : whether the finite-strain measures were used
    """

    __slots__ = ("F", "gradF", "E", "gradE", "J", "finite")

    def __init__(self, F, gradF, E, gradE, J, finite):
        self.F = F
        self.gradF = gradF
        self.E = E
        self.gradE = gradE
        self.J = J
        self.finite = finite


def compute_kinematics(grad_u, grad_grad_u=None, finite: bool = True) -> Kinematics:
    """Strain and strain gradient from displacement gradients.

    Parameters
    ----------
    grad_u : array or Dual, shape (..., 3, 3)
        Displacement gradient, indices [i, J].
    grad_grad_u : array or Dual, shape (..., 3, 3, 3), optional
        Second displacement gradient, indices [i, J, K], symmetric in the
        trailing pair. Omit for materials without a gradient term; gradF
        and gradE are then None and no second-gradient work is done.
    finite : bool
        Finite-strain measures when true; the linearized small-strain
        measures otherwise.

    Returns
    -------
    Kinematics
    """
    if finite:
        F = grad_u + IDENTITY3
        E = 0.5 * (ein("...kA,...kB->...AB", F, F) - IDENTITY3)
        gradE = None
        if grad_grad_u is not None:
            gradE = 0.5 * (
                ein("...kAC,...kB->...ABC", grad_grad_u, F)
                + ein("...kA,...kBC->...ABC", F, grad_grad_u)
            )
        J = det3(F)
        return Kinematics(F, grad_grad_u, E, gradE, J, True)

    # Small strain: the configuration map is frozen at the identity, so
    # stresses below degenerate to their linear-theory forms exactly.
    E = 0.5 * (grad_u + _swap_value_axes(grad_u, -2, -1))
    gradE = None
    if grad_grad_u is not None:
        gradE = 0.5 * (grad_grad_u + _swap_value_axes(grad_grad_u, -3, -2))
    batch = value_of(grad_u).shape[:-2]
    F = np.broadcast_to(IDENTITY3, batch + (3, 3))
    gradF = np.broadcast_to(np.zeros(1), batch + (3, 3, 3))
    J = np.ones(batch)
    return Kinematics(F, gradF, E, gradE, J, False)


def _swap_value_axes(x, ax1: int, ax2: int):
    """Transpose two value axes of an array or Dual."""
    if isinstance(x, Dual):
        return x.swap(ax1, ax2)
    return np.swapaxes(x, ax1, ax2)
