"""Newton continuation for the assembled gradient-elasticity systems.

Loads (tractions, line loads, nonzero boundary data) are applied in
increments. Each increment is solved by a full Newton iteration with the
consistent tangent from the augmented assembly; an increment that fails,
either by exceeding the iteration budget or by inverting an element, is
bisected and retried from the last converged state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .assembly import ElementInversionError, System

__all__ = [
    "NewtonConfig",
    "StepRecord",
    "SolveReport",
    "NonConvergenceError",
    "SingularSystemError",
    "linear_solve",
    "newton_solve",
]


class NonConvergenceError(RuntimeError):
    """Raised when Newton fails even after all step bisections."""


class SingularSystemError(RuntimeError):
    """Raised when the tangent factorization hits an exactly zero pivot."""


@dataclass(frozen=True)
class NewtonConfig:
    """Iteration and continuation controls.

    Convergence is declared when the residual 2-norm falls below
    max(tol_abs, tol_rel * r0) with r0 the first residual norm of the
    current increment, or when the Newton update becomes negligible
    relative to the solution (tol_step). The step criterion matters for
    stiff gradient terms, whose tangent norms put the achievable
    residual floor above tol_rel while the solution itself is converged
    to machine precision.
    """

    tol_rel: float = 1e-10
    tol_abs: float = 1e-12
    tol_step: float = 1e-12
    max_iter: int = 50
    load_steps: int = 10
    max_bisections: int = 5


@dataclass
class StepRecord:
    """Convergence history of one accepted load increment."""

    scale: float
    iterations: int
    residuals: list


@dataclass
class SolveReport:
    """Outcome of a continuation run."""

    converged: bool
    steps: list = field(default_factory=list)
    n_bisections: int = 0

    @property
    def total_iterations(self) -> int:
        return sum(s.iterations for s in self.steps)


def linear_solve(K, rhs: np.ndarray) -> np.ndarray:
    """Sparse direct solve via LU factorization.

    Raises SingularSystemError naming the first structurally zero pivot
    row when the factorization fails.
    """
    try:
        lu = spla.splu(K.tocsc())
        return lu.solve(rhs)
    except RuntimeError as err:
        diag = K.diagonal()
        zero = np.nonzero(diag == 0.0)[0]
        where = f" (first zero diagonal at dof {zero[0]})" if zero.size else ""
        raise SingularSystemError(
            f"tangent factorization failed: {err}{where}"
        ) from err


def _newton_step(system: System, U: np.ndarray, scale: float,
                 config: NewtonConfig):
    """Newton iteration at a fixed load factor; returns (U, record) or None."""
    U = system.apply_constraints(U, scale)
    residuals = []
    step_rel = np.inf
    for it in range(config.max_iter + 1):
        try:
            R, K = system.assemble(U, scale, want_jacobian=True)
        except ElementInversionError:
            return None
        rnorm = float(np.linalg.norm(R))
        residuals.append(rnorm)
        tol = max(config.tol_abs, config.tol_rel * residuals[0])
        if rnorm <= tol or step_rel <= config.tol_step:
            return U, StepRecord(scale, it, residuals)
        if it == config.max_iter:
            return None
        dU = linear_solve(K, R)
        U = U - dU
        step_rel = float(
            np.linalg.norm(dU) / max(np.linalg.norm(U), config.tol_abs)
        )
    return None


def newton_solve(system: System, U0: np.ndarray | None = None,
                 config: NewtonConfig | None = None,
                 callback=None):
    """Solve the system by incremental loading with Newton corrections.

    Parameters
    ----------
    system : System
    U0 : ndarray, optional
        Starting coefficients, defaults to zero. A nonzero guess matters
        for nonconvex energies, where it selects the solution branch.
    config : NewtonConfig, optional
    callback : callable, optional
        Called with each accepted StepRecord, useful for progress logs.

    Returns
    -------
    (U, SolveReport)

    Raises
    ------
    NonConvergenceError
        If an increment keeps failing after max_bisections halvings.
    """
    config = config or NewtonConfig()
    U = np.zeros(system.ndof) if U0 is None else np.asarray(U0, float).copy()
    report = SolveReport(converged=False)

    reached = 0.0
    U_conv = U
    targets = list(np.linspace(1.0 / config.load_steps, 1.0, config.load_steps))
    depth = 0
    while targets:
        target = targets[0]
        result = _newton_step(system, U_conv, target, config)
        if result is None:
            depth += 1
            report.n_bisections += 1
            if depth > config.max_bisections:
                raise NonConvergenceError(
                    f"no convergence between load factors {reached:.4g} "
                    f"and {target:.4g} after {config.max_bisections} "
                    "bisections"
                )
            targets.insert(0, 0.5 * (reached + target))
            continue
        U_conv, record = result
        report.steps.append(record)
        if callback is not None:
            callback(record)
        reached = target
        targets.pop(0)
        depth = 0

    report.converged = True
    return U_conv, report
