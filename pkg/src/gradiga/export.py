"""Field export to legacy VTK and CSV.

Fields are sampled on a uniform parametric grid, pushed to physical
coordinates, and written with the displacement vector and the true
(Cauchy) stress at every sample. The VTK writer emits the ASCII legacy
structured-grid format, which every common viewer reads without plugins.
"""

from __future__ import annotations

import csv

import numpy as np

from .assembly import System
from .kinematics import compute_kinematics
from .material import cauchy_pushforward
from .mesh import evaluate_field

__all__ = ["sample_state", "export_vtk", "export_csv"]


def sample_state(system: System, U: np.ndarray, n: int = 10) -> dict:
    """Field samples on a uniform n-per-direction parametric grid.

    Returns a dict with the grid shape "dims" (always length 3, padded
    with ones), reference positions "x", displacements "u" (both padded
    to three components), displacement magnitudes "umag", the Cauchy
    stress "sigma" (n_samples, 3, 3), the volume ratio "J", and the
    energy densities "w_local" and "w_gradient".
    """
    patch = system.patch
    dim = patch.dim_param
    axes = [np.linspace(*kv.domain, n) for kv in patch.knots]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    coeffs = np.asarray(U, dtype=np.float64).reshape(patch.n_control, system.ncomp)

    u, grad, hess = evaluate_field(patch, coeffs, pts, nderiv=2)
    x = evaluate_field(patch, patch.control.reshape(-1, dim), pts)

    npts = pts.shape[0]
    grad3 = np.zeros((npts, 3, 3))
    grad3[:, : system.ncomp, :dim] = grad
    hess3 = np.zeros((npts, 3, 3, 3))
    hess3[:, : system.ncomp, :dim, :dim] = hess
    kin = compute_kinematics(grad3, hess3, system.finite)
    P, B = system.material.stresses(kin)
    sigma, _ = cauchy_pushforward(kin, P, B)
    w_local, w_gradient = system.material.energy_parts(kin)

    def pad(a):
        out = np.zeros((npts, 3))
        out[:, : a.shape[1]] = a
        return out

    dims = [1, 1, 1]
    dims[:dim] = [n] * dim
    u = pad(u)
    return {
        "dims": dims, "x": pad(x), "u": u,
        "umag": np.sqrt((u * u).sum(axis=1)),
        "sigma": sigma, "J": np.asarray(kin.J, dtype=np.float64),
        "w_local": np.asarray(w_local, dtype=np.float64),
        "w_gradient": np.broadcast_to(
            np.asarray(w_gradient, dtype=np.float64), (npts,)
        ),
    }


def export_vtk(path, system: System, U: np.ndarray, n: int = 10) -> None:
    """Write the sampled fields as a legacy ASCII structured grid.

    Points are the deformed sample positions; point data carries the
    displacement vector, its magnitude, the energy densities, the volume
    ratio det F, and the Cauchy stress. Values use 17 significant digits
    so readers recover them exactly.
    """
    state = sample_state(system, U, n)
    dims = state["dims"]
    npts = len(state["x"])
    deformed = state["x"] + state["u"]
    # Legacy structured grids iterate the first coordinate fastest; the
    # sample grid is C ordered, so write it in Fortran order.
    order = (
        np.arange(npts)
        .reshape(dims[: system.patch.dim_param] + [1] * (3 - system.patch.dim_param))
        .ravel(order="F")
    )

    def scalars(fh, name, values):
        fh.write(f"SCALARS {name} double\n")
        fh.write("LOOKUP_TABLE default\n")
        for i in order:
            fh.write(f"{values[i]:.17g}\n")

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("gradiga field export\n")
        fh.write("ASCII\n")
        fh.write("DATASET STRUCTURED_GRID\n")
        fh.write(f"DIMENSIONS {dims[0]} {dims[1]} {dims[2]}\n")
        fh.write(f"POINTS {npts} double\n")
        for i in order:
            fh.write("{:.17g} {:.17g} {:.17g}\n".format(*deformed[i]))
        fh.write(f"POINT_DATA {npts}\n")
        fh.write("VECTORS displacement double\n")
        for i in order:
            fh.write("{:.17g} {:.17g} {:.17g}\n".format(*state["u"][i]))
        scalars(fh, "displacement_magnitude", state["umag"])
        scalars(fh, "energy_local", state["w_local"])
        scalars(fh, "energy_gradient", state["w_gradient"])
        scalars(fh, "det_F", state["J"])
        fh.write("TENSORS cauchy_stress double\n")
        for i in order:
            fh.write(" ".join(f"{v:.17g}" for v in state["sigma"][i].ravel()))
            fh.write("\n")


def export_csv(path, system: System, U: np.ndarray, n: int = 10) -> None:
    """Write sampled displacement and Cauchy stress as CSV rows."""
    state = sample_state(system, U, n)
    header = (
        ["x", "y", "z", "ux", "uy", "uz"]
        + ["s11", "s22", "s33", "s12", "s13", "s23"]
    )
    sig = state["sigma"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(len(state["x"])):
            row = list(state["x"][i]) + list(state["u"][i]) + [
                sig[i, 0, 0], sig[i, 1, 1], sig[i, 2, 2],
                sig[i, 0, 1], sig[i, 0, 2], sig[i, 1, 2],
            ]
            writer.writerow([f"{v:.12g}" for v in row])
