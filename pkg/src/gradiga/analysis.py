"""Validation studies, error measures, and field diagnostics.

The linear gradient bar admits a closed-form solution with boundary
layers of width l at both ends; :func:`analytic_1d` evaluates it in a
form that stays well scaled for small l, and :func:`seminorm_error`
measures H1 and H2 seminorm distances against it on an elevated
quadrature rule. :func:`convergence_study` runs mesh sequences and fits
the observed rates.

The remaining helpers probe solved displacement fields: uniform-grid
sampling, strain interface detection for the multiwell bar, and the
variation-diminishing initial guess that seeds its two-phase solution.
"""

from __future__ import annotations

import time

import numpy as np

from .assembly import DirichletBC, FaceTraction, System, WeakNormalDerivativeBC
from .material import MULTIWELL_ROOTS, ToupinQuadratic
from .mesh import Patch, TableBuilder, box_patch, evaluate_field
from .solver import NewtonConfig, newton_solve
from .splines import KnotVector, eval_basis

__all__ = [
    "analytic_1d",
    "validation_bar",
    "bar_material",
    "seminorm_error",
    "convergence_study",
    "energy_split",
    "hyperstress_work",
    "displacement_max",
    "field_probe",
    "interface_width",
    "multiwell_initial_guess",
]


def analytic_1d(x, l: float, mu: float = 1.0, t: float = 1.0, L: float = 1.0):
    """Closed-form axial displacement of the linear gradient bar.

    The bar on [0, L] with shear modulus mu and internal length l is
    fixed at x = 0, pulled by the traction t at x = L, and has zero
    normal derivative of displacement at both ends. The solution is the
    classical linear ramp plus exponential boundary layers of width l.

    Written with decaying exponentials only, so it evaluates cleanly for
    L/l of any size. l = 0 returns the classical bar solution.

    Returns (u, du, d2u) at the points x.
    """
    x = np.asarray(x, dtype=np.float64)
    if l == 0.0:
        return (t / mu) * x, np.full_like(x, t / mu), np.zeros_like(x)
    e_lo = np.exp(-x / l)
    e_hi = np.exp((x - L) / l)
    denom = 1.0 + np.exp(-L / l)
    u = (t * l / mu) * (np.exp(-L / l) - 1.0 + e_lo - e_hi) / denom + (t / mu) * x
    du = (t / mu) * (1.0 - (e_lo + e_hi) / denom)
    d2u = (t / (mu * l)) * (e_lo - e_hi) / denom
    return u, du, d2u


def bar_material(l: float, mu: float = 1.0) -> ToupinQuadratic:
    """Material whose axial response matches the analytic bar exactly.

    The closed form uses the decoupled moduli sigma = mu u' and
    beta = mu l^2 u''. In the tensor energy the axial strain enters
    E : E once, not doubled, so matching requires halving the shear
    modulus and stretching the internal length by sqrt(2); the products
    2 mu_eff and mu_eff l_eff^2 then reproduce mu and mu l^2.
    """
    length = np.sqrt(2.0) * l if l > 0.0 else 0.0
    return ToupinQuadratic(lam=0.0, mu=0.5 * mu, length=length)


def validation_bar(l: float, mu: float = 1.0, t: float = 1.0, L: float = 1.0,
                   n_elements: int = 100, degree: int = 2,
                   mode: str = "small") -> System:
    """Discrete gradient bar matching the analytic 1D problem.

    mode selects "small" (linearized, comparable to the closed form) or
    "finite" strain kinematics.
    """
    if mode not in ("small", "finite"):
        raise ValueError(f"mode must be 'small' or 'finite', got '{mode}'")
    patch = box_patch(degree, (n_elements,), (0.0,), (L,))
    # Without a gradient term there is no higher-order condition to
    # enforce; the penalty alone would wrongly pin the end strains.
    weak = []
    if l > 0.0:
        weak = [WeakNormalDerivativeBC("xmin"), WeakNormalDerivativeBC("xmax")]
    return System(
        patch,
        bar_material(l, mu),
        finite=(mode == "finite"),
        dirichlet=[DirichletBC("xmin", (0,), 0.0)],
        weak=weak,
        loads=[FaceTraction("xmax", (t,))],
    )


def seminorm_error(patch: Patch, coeffs: np.ndarray, exact) -> dict:
    """H1 and H2 seminorm errors of a 1D field against a closed form.

    Integrates with degree + 2 Gauss points per span, two more than
    assembly uses, so the error measure is not confounded with the
    quadrature of the solve.

    Parameters
    ----------
    patch : Patch
        One-dimensional patch.
    coeffs : ndarray
        Control coefficients, shape (n_control, 1) or (n_control,).
    exact : callable
        Maps physical points x to the tuple (u, du, d2u).

    Returns
    -------
    dict with keys "h1" and "h2".
    """
    if patch.dim_param != 1:
        raise ValueError("seminorm_error expects a one-dimensional patch")
    coeffs = np.asarray(coeffs, dtype=np.float64).reshape(patch.n_control, 1)
    builder = TableBuilder(patch, patch.degrees[0] + 2)
    tables = builder.volume()
    u_loc = coeffs[builder.connectivity[tables.elements]]
    du = np.einsum("eai,eqaJ->eqiJ", u_loc, tables.dN)[..., 0, 0]
    d2u = np.einsum("eai,eqaJK->eqiJK", u_loc, tables.d2N)[..., 0, 0, 0]
    _, du_ex, d2u_ex = exact(tables.x[..., 0])
    h1 = float(np.einsum("eq,eq->", (du - du_ex) ** 2, tables.wdet))
    h2 = float(np.einsum("eq,eq->", (d2u - d2u_ex) ** 2, tables.wdet))
    return {"h1": np.sqrt(h1), "h2": np.sqrt(h2)}


def convergence_study(l: float, mu: float = 1.0, t: float = 1.0, L: float = 1.0,
                      degrees=(2, 3), meshes=(10, 20, 40, 80, 160),
                      mode: str = "small") -> dict:
    """Seminorm errors and fitted rates over a mesh sequence.

    Returns a dict keyed by degree, each entry holding the mesh sizes,
    the H1 and H2 seminorm errors, the least-squares convergence rates,
    and wall time.
    """
    out = {}
    exact = lambda x: analytic_1d(x, l, mu, t, L)  # noqa: E731
    for degree in degrees:
        t0 = time.perf_counter()
        errs = {"h1": [], "h2": []}
        for n in meshes:
            system = validation_bar(l, mu, t, L, n, degree, mode)
            U, _ = newton_solve(system, config=NewtonConfig(load_steps=1))
            err = seminorm_error(system.patch, U, exact)
            errs["h1"].append(err["h1"])
            errs["h2"].append(err["h2"])
        h = 1.0 / np.asarray(meshes, dtype=np.float64)
        out[degree] = {
            "meshes": list(meshes),
            "h1": errs["h1"],
            "h2": errs["h2"],
            "rate_h1": float(np.polyfit(np.log(h), np.log(errs["h1"]), 1)[0]),
            "rate_h2": float(np.polyfit(np.log(h), np.log(errs["h2"]), 1)[0]),
            "seconds": time.perf_counter() - t0,
        }
    return out


def energy_split(system: System, U: np.ndarray) -> tuple:
    """(local, gradient) strain energy of a solved state."""
    return system.energy_split(U)


def hyperstress_work(system: System, U: np.ndarray) -> float:
    """Internal work of the higher-order stress against the second
    displacement gradient, integrated over the body.

    Because the higher-order stress is linear in the strain gradient,
    this work equals exactly twice the stored gradient energy (Euler's
    identity for homogeneous quadratics). Energy-partition studies
    compare it against the local strain energy, which is the analogous
    work measure of the lower-order response only in the linear regime.
    """
    return 2.0 * system.energy_split(U)[1]


def _span_grid(kv: KnotVector, refine: int) -> np.ndarray:
    """Uniform sample points per knot span, span ends included once."""
    brk = np.unique(kv.knots)
    segs = [np.linspace(a, b, refine + 1)[:-1]
            for a, b in zip(brk[:-1], brk[1:])]
    return np.concatenate(segs + [brk[-1:]])


def _collocation(kv: KnotVector, pts: np.ndarray) -> np.ndarray:
    """Dense (npts, n) matrix of basis values at the sample points."""
    C = np.zeros((pts.size, kv.n))
    for k, xi in enumerate(pts):
        be = eval_basis(kv, float(xi), nderiv=0)
        C[k, be.span - kv.degree:be.span + 1] = be.values
    return C


def displacement_max(patch: Patch, coeffs: np.ndarray,
                     refine: int = 10) -> float:
    """Largest displacement magnitude over a refined tensor sample grid.

    Every knot span is subdivided ``refine`` times per direction, span
    ends included, and |u| is taken over the resulting tensor grid. The
    sweep exploits separability: one small collocation matrix per
    direction is applied to the weighted coefficients, then normalized
    by the same sweep of the rational weights, so dense grids over fine
    meshes stay cheap.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64).reshape(patch.n_control, -1)
    num = coeffs.reshape(patch.n_per_dir + (-1,)) * patch.weights[..., None]
    den = patch.weights
    for axis, kv in enumerate(patch.knots):
        C = _collocation(kv, _span_grid(kv, refine))
        num = np.moveaxis(np.tensordot(C, num, axes=(1, axis)), 0, axis)
        den = np.moveaxis(np.tensordot(C, den, axes=(1, axis)), 0, axis)
    u = num / den[..., None]
    return float(np.sqrt((u * u).sum(axis=-1)).max())


def field_probe(patch: Patch, coeffs: np.ndarray, n: int = 10):
    """Displacement samples on a uniform parametric grid.

    Returns (x, u) with n points per direction including the domain
    boundary, flattened over the grid.
    """
    axes = []
    for kv in patch.knots:
        lo, hi = kv.domain
        axes.append(np.linspace(lo, hi, n))
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    coeffs = np.asarray(coeffs, dtype=np.float64).reshape(patch.n_control, -1)
    u = evaluate_field(patch, coeffs, pts)
    x = _physical_points(patch, pts)
    return x, u


def _physical_points(patch: Patch, pts: np.ndarray) -> np.ndarray:
    """Geometry map applied to parametric points via the control net."""
    return evaluate_field(patch, patch.control.reshape(-1, patch.dim_phys), pts)


def interface_width(patch: Patch, coeffs: np.ndarray,
                    lo: float = 0.1, hi: float = 0.9,
                    n_samples: int = 2001) -> dict:
    """Strain interface count and 10-90 width of a 1D two-phase field.

    Samples the strain du/dx on a dense grid, normalizes it between its
    extremes, counts crossings of the midlevel, and measures the distance
    between the lo and hi level crossings around the steepest point.

    Returns a dict with "n_interfaces", "width", "strain_min",
    "strain_max".
    """
    if patch.dim_param != 1:
        raise ValueError("interface_width expects a one-dimensional patch")
    kv = patch.knots[0]
    pts = np.linspace(*kv.domain, n_samples)[:, None]
    coeffs = np.asarray(coeffs, dtype=np.float64).reshape(patch.n_control, 1)
    _, grads = evaluate_field(patch, coeffs, pts, nderiv=1)
    x = _physical_points(patch, pts)[:, 0]
    eps = grads[:, 0, 0]
    emin, emax = float(eps.min()), float(eps.max())
    # A uniform strain field carries no interface; without the relative
    # floor, normalizing its roundoff noise would count spurious ones.
    if emax - emin <= 1e-10 * max(1.0, abs(emin), abs(emax)):
        return {"n_interfaces": 0, "width": np.nan,
                "strain_min": emin, "strain_max": emax}
    s = (eps - emin) / (emax - emin)
    mid = s - 0.5
    crossings = np.nonzero(np.diff(np.signbit(mid)))[0]
    width = np.nan
    if crossings.size:
        k = crossings[np.argmax(np.abs(np.diff(s))[crossings])]
        x_lo = _level_crossing(x, s, k, lo)
        x_hi = _level_crossing(x, s, k, hi)
        if x_lo is not None and x_hi is not None:
            width = abs(x_hi - x_lo)
    return {"n_interfaces": int(crossings.size), "width": float(width),
            "strain_min": emin, "strain_max": emax}


def _level_crossing(x, s, k, level):
    """Position where s crosses a level, searched outward from sample k."""
    g = s - level
    for j in range(len(x) - 1):
        for i in (k - j, k + j):
            if 0 <= i < len(x) - 1 and g[i] * g[i + 1] <= 0.0 and g[i] != g[i + 1]:
                f = g[i] / (g[i] - g[i + 1])
                return x[i] + f * (x[i + 1] - x[i])
    return None


def multiwell_initial_guess(patch: Patch) -> np.ndarray:
    """Single-interface seed for the phase-separating bar.

    Builds the piecewise linear field with slope at the positive well on
    the left and the negative well on the right, vanishing at both ends,
    and samples it at the Greville abscissae. This variation-diminishing
    sampling inherits the kink without overshoot, which is what keeps
    Newton on the two-phase branch.
    """
    if patch.dim_param != 1:
        raise ValueError("the multiwell seed is one-dimensional")
    e_minus, _, e_plus = MULTIWELL_ROOTS
    x0_frac = -e_minus / (e_plus - e_minus)
    x = _physical_points(patch, patch.greville_grid().reshape(-1, 1))[:, 0]
    lo, hi = x.min(), x.max()
    span = hi - lo
    x0 = lo + x0_frac * span
    u = np.where(x <= x0, e_plus * (x - lo), e_minus * (x - hi))
    return u.reshape(-1)
