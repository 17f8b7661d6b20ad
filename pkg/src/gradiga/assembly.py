"""Galerkin residual and tangent assembly for the gradient bar problems.

The weak statement integrated here balances the first Piola stress P
against gradients of the test function and the double stress B against
second gradients,

    R_int = volume integral of P : grad(w) + B : grad(grad(w)),

subtracts dead surface tractions and edge line loads, and adds the
penalized weak enforcement of normal-derivative (higher-order Dirichlet)
data on marked faces,

    - integral of Dw . (B n n)  +  (C mu l^2 / h) integral of Dw . (Du - m),

where Du = grad(u) n is the normal derivative on the face, m the
prescribed value, h the element extent across the face, mu l^2 the
gradient rigidity of the material, and C a dimensionless penalty. The
consistency term keeps the statement exact for the true solution, so
the penalty only needs to stabilize, and the rigidity factor keeps its
weight on the scale of the flux it constrains for any length scale.
Classical Dirichlet data is imposed strongly on boundary control
points, which the open knot vectors make interpolatory.

Residual contributions are evaluated in element batches through the
Dual-number arithmetic, so each batch yields its exact consistent tangent
block alongside the residual. Scatter into global arrays stays serial and
ordered, which keeps assembly deterministic for any thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .autodiff import Dual, ein, extract_jacobian, value_of
from .kinematics import compute_kinematics
from .mesh import Patch, TableBuilder, enumerate_boundary

__all__ = [
    "DirichletBC",
    "PointDirichlet",
    "WeakNormalDerivativeBC",
    "FaceTraction",
    "TorqueTraction",
    "EdgeLoad",
    "ElementInversionError",
    "System",
]


class ElementInversionError(RuntimeError):
    """Raised when the deformation gradient loses positive determinant."""


@dataclass(frozen=True)
class DirichletBC:
    """Strong displacement constraint on all control points of a face.

    Parameters
    ----------
    face : str
        Boundary face name, e.g. "zmin".
    components : tuple of int
        Displacement components to constrain.
    value : float or sequence
        Prescribed value per constrained component; scaled by the load
        factor during incremental solves.
    """

    face: str
    components: tuple
    value: object = 0.0


@dataclass(frozen=True)
class PointDirichlet:
    """Constraint on the single control point nearest a physical location.

    Used to remove rigid modes from traction-driven problems without
    altering the tractions.
    """

    location: tuple
    components: tuple
    value: object = 0.0


@dataclass(frozen=True)
class WeakNormalDerivativeBC:
    """Penalized normal-derivative condition Du = value on a face.

    penalty is dimensionless; the assembled weight is penalty times the
    material's gradient rigidity mu l^2 over the element extent across
    the face, the standard stabilization scale for the fourth-order
    term whose flux the condition constrains. components selects which
    displacement components carry the condition; None means all of
    them.
    """

    face: str
    value: object = 0.0
    penalty: float = 5.0
    components: tuple | None = None


@dataclass(frozen=True)
class FaceTraction:
    """Constant dead traction vector per unit reference area."""

    face: str
    vector: tuple = ()


@dataclass(frozen=True)
class TorqueTraction:
    """Dead traction field of an areal torque density about a face normal.

    The traction t(X) = m (a x r) acts about the face centroid, with a
    the unit face normal, r the in-plane offset, and m the torque
    density. The resultant torque is m times the polar moment of the
    face about its centroid.
    """

    face: str
    moment_density: float


@dataclass(frozen=True)
class EdgeLoad:
    """Constant line load along the edge shared by two faces."""

    faces: tuple
    vector: tuple = ()


def _as_vector(value, n):
    v = np.zeros(n)
    v[:] = value
    return v


class System:
    """Discrete gradient-elasticity problem on one patch.

    Holds the mesh tables, material, boundary data, and scatter layout.
    Degrees of freedom are ordered control point first, component
    fastest: dof = point * ncomp + component.

    Parameters
    ----------
    patch : Patch
    material : object
        Provides energy_parts, energy_density, and stresses on a
        Kinematics batch.
    finite : bool
        Finite-strain kinematics when true, linearized otherwise.
    dirichlet, weak, loads, edge_loads, points : sequences
        Boundary conditions and dead loads; see the dataclasses above.
    chunk_size : int, optional
        Elements per assembly batch; sized automatically from the local
        seed count when omitted.
    n_threads : int, optional
        Worker threads for batch kernels; defaults to the
        GRADIGA_THREADS environment variable, else 1.
    """

    def __init__(self, patch: Patch, material, *, finite: bool = True,
                 dirichlet=(), weak=(), loads=(), edge_loads=(), points=(),
                 chunk_size: int | None = None, n_threads: int | None = None):
        if patch.dim_param != patch.dim_phys:
            raise ValueError("parametric and physical dimensions must agree")
        self.patch = patch
        self.material = material
        self.finite = bool(finite)
        self.dirichlet = tuple(dirichlet)
        self.weak = tuple(weak)
        self.loads = tuple(loads)
        self.edge_loads = tuple(edge_loads)
        self.points = tuple(points)
        self.dim = patch.dim_param
        self.ncomp = patch.dim_phys
        self.ndof = patch.n_control * self.ncomp

        self.builder = TableBuilder(patch)
        self._conn = self.builder.connectivity
        n_local_dof = self.builder.n_local * self.ncomp
        if chunk_size is None:
            # Budget roughly 4e6 dual floats per batch kernel.
            per_el = self.builder.nq_volume * self.builder.n_local * n_local_dof
            chunk_size = max(1, int(4e6 / max(per_el, 1)))
        self.chunk_size = int(chunk_size)
        if n_threads is None:
            n_threads = int(os.environ.get("GRADIGA_THREADS", "1"))
        self.n_threads = max(1, int(n_threads))

        self._chunks = np.array_split(
            np.arange(patch.n_elements),
            max(1, -(-patch.n_elements // self.chunk_size)),
        )
        self._needs_gradE = bool(
            getattr(material, "needs_strain_gradient", True)
        )
        self._vol_cache = {}
        self._face_cache = {}
        self._edge_cache = {}
        self._traction_cache = {}
        self._constraints = self._build_constraints()

    # -- tables ------------------------------------------------------------

    def _vol(self, i):
        if i not in self._vol_cache:
            self._vol_cache[i] = self.builder.volume(self._chunks[i])
        return self._vol_cache[i]

    def _face(self, name):
        if name not in self._face_cache:
            self._face_cache[name] = self.builder.face(name)
        return self._face_cache[name]

    def _edge(self, names):
        key = tuple(names)
        if key not in self._edge_cache:
            self._edge_cache[key] = self.builder.edge(key)
        return self._edge_cache[key]

    # -- constraints ---------------------------------------------------------

    def _face_control_points(self, name):
        axis, side = enumerate_boundary(self.patch)[name]
        grid = np.arange(self.patch.n_control).reshape(self.patch.n_per_dir)
        layer = np.moveaxis(grid, axis, 0)[0 if side == 0 else -1]
        return np.asarray(layer).ravel()

    def _nearest_control_point(self, location):
        pts = self.patch.control.reshape(-1, self.dim)
        loc = np.asarray(location, dtype=np.float64).reshape(self.dim)
        return int(np.argmin(np.einsum("ai,ai->a", pts - loc, pts - loc)))

    def _build_constraints(self):
        table = {}

        def add(point, comp, val):
            dof = point * self.ncomp + comp
            if dof in table and table[dof] != val:
                raise ValueError(
                    f"conflicting Dirichlet values at dof {dof}: "
                    f"{table[dof]} vs {val}"
                )
            table[dof] = val

        for bc in self.dirichlet:
            vals = _as_vector(bc.value, len(bc.components))
            for point in self._face_control_points(bc.face):
                for c, v in zip(bc.components, vals):
                    if not 0 <= c < self.ncomp:
                        raise ValueError(f"component {c} out of range")
                    add(int(point), int(c), float(v))
        for pc in self.points:
            point = self._nearest_control_point(pc.location)
            vals = _as_vector(pc.value, len(pc.components))
            for c, v in zip(pc.components, vals):
                add(point, int(c), float(v))
        if table:
            idx = np.array(sorted(table), dtype=np.intp)
            val = np.array([table[i] for i in idx])
        else:
            idx = np.empty(0, dtype=np.intp)
            val = np.empty(0)
        mask = np.zeros(self.ndof, dtype=bool)
        mask[idx] = True
        return idx, val, mask

    @property
    def constrained(self):
        """(dof indices, values at unit load factor) of strong constraints."""
        return self._constraints[0], self._constraints[1]

    def apply_constraints(self, U: np.ndarray, scale: float = 1.0) -> np.ndarray:
        """Overwrite constrained entries with their prescribed values."""
        idx, val, _ = self._constraints
        U = np.array(U, dtype=np.float64, copy=True)
        U[idx] = scale * val
        return U

    # -- kinematic embedding ---------------------------------------------

    def _embed(self, g, extra_axes: int):
        """Zero-pad a (batch, ncomp, dim, ...) gradient block to 3x3(x3)."""
        if self.ncomp == 3:
            return g
        val = value_of(g)
        batch = val.shape[: val.ndim - 1 - extra_axes]
        shape = batch + (3,) * (1 + extra_axes)
        if isinstance(g, Dual):
            out = Dual.zeros(shape, g.nseed)
        else:
            out = np.zeros(shape)
        key = (Ellipsis, slice(0, self.ncomp)) + (slice(0, self.dim),) * extra_axes
        out[key] = g
        return out

    def _seeded_gradients(self, U_loc, tables, with_gradients: bool):
        """Displacement gradient Duals seeded over the batch's local dofs.

        Equivalent to contracting identity-seeded dof Duals with the basis
        tables, but the derivative block of that contraction is just the
        basis table scattered across components, so it is assigned in
        place of the einsum reduction. These seeds dominate the cost of
        tangent assembly, which makes the shortcut worthwhile.
        """
        nc, d = self.ncomp, self.dim
        e, q, nloc = tables.N.shape
        nseed = nloc * nc
        gv = np.einsum("eai,eqaJ->eqiJ", U_loc, tables.dN, optimize=True)
        gd = np.zeros((e, q, nc, d, nloc, nc))
        dn = tables.dN.transpose(0, 1, 3, 2)
        for i in range(nc):
            gd[:, :, i, :, :, i] = dn
        grad_u = Dual(gv, gd.reshape(e, q, nc, d, nseed))
        if not with_gradients:
            return grad_u, None
        g2v = np.einsum("eai,eqaJK->eqiJK", U_loc, tables.d2N, optimize=True)
        g2d = np.zeros((e, q, nc, d, d, nloc, nc))
        d2n = tables.d2N.transpose(0, 1, 3, 4, 2)
        for i in range(nc):
            g2d[:, :, i, :, :, :, i] = d2n
        grad2_u = Dual(g2v, g2d.reshape(e, q, nc, d, d, nseed))
        return grad_u, grad2_u

    def _gradients(self, U_loc, tables, want_jac: bool, with_gradients: bool):
        """First and optional second displacement gradients of a batch."""
        if want_jac:
            return self._seeded_gradients(U_loc, tables, with_gradients)
        grad_u = np.einsum("eai,eqaJ->eqiJ", U_loc, tables.dN, optimize=True)
        grad2_u = None
        if with_gradients:
            grad2_u = np.einsum(
                "eai,eqaJK->eqiJK", U_loc, tables.d2N, optimize=True
            )
        return grad_u, grad2_u

    def _kinematics_of(self, U_loc, tables, want_jac: bool = False,
                       with_gradients: bool | None = None):
        """Strain measures at a table's quadrature points for local dofs.

        Second gradients are skipped when the material never reads GradE
        unless with_gradients forces them, as post-processing does.
        """
        if with_gradients is None:
            with_gradients = self._needs_gradE
        grad_u, grad2_u = self._gradients(U_loc, tables, want_jac, with_gradients)
        g2 = self._embed(grad2_u, 2) if grad2_u is not None else None
        return compute_kinematics(self._embed(grad_u, 1), g2, self.finite)

    # -- dead loads ---------------------------------------------------------

    def _traction_field(self, load) -> np.ndarray:
        """Traction samples (nf, nq, ncomp) at unit load factor, cached."""
        key = id(load)
        if key in self._traction_cache:
            return self._traction_cache[key]
        ft = self._face(load.face)
        if isinstance(load, FaceTraction):
            t = np.broadcast_to(
                _as_vector(load.vector, self.ncomp), ft.x.shape
            ).copy()
        elif isinstance(load, TorqueTraction):
            axis = ft.normal[0, 0]
            area = ft.wdS.sum()
            centroid = np.einsum("fqi,fq->i", ft.x, ft.wdS) / area
            r = ft.x - centroid
            r = r - np.einsum("fqi,i->fq", r, axis)[..., None] * axis
            t = load.moment_density * np.cross(
                np.broadcast_to(axis, r.shape), r
            )
        else:
            raise TypeError(f"unknown load type {type(load).__name__}")
        self._traction_cache[key] = t
        return t

    # -- batch kernels ------------------------------------------------------

    def _gdof(self, elements) -> np.ndarray:
        """Global dof ids per element, local point first, component fastest."""
        conn = self._conn[elements]
        g = conn[:, :, None] * self.ncomp + np.arange(self.ncomp)
        return g.reshape(len(elements), -1)

    def _volume_kernel(self, i, U2, want_jac):
        tables = self._vol(i)
        U_loc = U2[self._conn[tables.elements]]
        kin = self._kinematics_of(U_loc, tables, want_jac)
        if self.finite:
            jmin = value_of(kin.J).min()
            if jmin <= 0.0:
                raise ElementInversionError(
                    f"deformation gradient determinant reached {jmin:.3e}"
                )
        P, B = self.material.stresses(kin)
        nc, d = self.ncomp, self.dim
        Pv = P[..., :nc, :d]
        r = ein("eqiJ,eqaJ,eq->eai", Pv, tables.dN, tables.wdet)
        if B is not None:
            Bv = B[..., :nc, :d, :d]
            r = r + ein("eqiJK,eqaJK,eq->eai", Bv, tables.d2N, tables.wdet)
        return self._pack(tables.elements, r, want_jac)

    def _weak_bc_kernel(self, bc, U2, scale, want_jac):
        ft = self._face(bc.face)
        U_loc = U2[self._conn[ft.elements]]
        grad_u, grad2_u = self._gradients(
            U_loc, ft, want_jac, self._needs_gradE
        )
        g2 = self._embed(grad2_u, 2) if grad2_u is not None else None
        kin = compute_kinematics(self._embed(grad_u, 1), g2, self.finite)
        _, B = self.material.stresses(kin)
        if B is None:
            bnn = 0.0
        else:
            Bv = B[..., : self.ncomp, : self.dim, : self.dim]
            bnn = ein("fqiJK,fqJ,fqK->fqi", Bv, ft.normal, ft.normal)
        du = ein("fqiJ,fqJ->fqi", grad_u, ft.normal)
        mbar = scale * _as_vector(bc.value, self.ncomp)
        gm = getattr(self.material, "gradient_modulus", 1.0)
        pen = (bc.penalty * gm / ft.h)[:, None, None]
        integrand = pen * (du - mbar) - bnn
        if bc.components is not None:
            sel = np.zeros(self.ncomp)
            sel[list(bc.components)] = 1.0
            integrand = integrand * sel
        dn = ein("fqaJ,fqJ->fqa", ft.dN, ft.normal)
        r = ein("fqi,fqa,fq->fai", integrand, dn, ft.wdS)
        return self._pack(ft.elements, r, want_jac)

    def _pack(self, elements, r, want_jac):
        """Split a batch residual into scatter ids, values, and tangent."""
        gdof = self._gdof(elements)
        nb = gdof.shape[0]
        rv = value_of(r).reshape(nb, -1)
        if not want_jac:
            return gdof, rv, None
        jac = extract_jacobian(r).reshape(nb, rv.shape[1], -1)
        return gdof, rv, jac

    # -- public assembly ----------------------------------------------------

    def assemble(self, U: np.ndarray, scale: float = 1.0,
                 want_jacobian: bool = False):
        """Global residual and, optionally, the consistent tangent.

        U must already satisfy the strong constraints at this load factor
        (see apply_constraints); constrained residual entries are replaced
        by the constraint mismatch and tangent rows and columns by
        identity, so Newton updates leave them untouched.

        Returns R of shape (ndof,), or the pair (R, K) with K in CSR form
        when want_jacobian is set.
        """
        U = np.asarray(U, dtype=np.float64).reshape(self.ndof)
        U2 = U.reshape(self.patch.n_control, self.ncomp)
        R = np.zeros(self.ndof)
        triplets = []

        def accumulate(result):
            gdof, rv, jac = result
            R[:] = R + np.bincount(
                gdof.ravel(), weights=rv.ravel(), minlength=self.ndof
            )
            if jac is not None:
                nb, nld = gdof.shape
                rows = np.broadcast_to(gdof[:, :, None], (nb, nld, nld))
                cols = np.broadcast_to(gdof[:, None, :], (nb, nld, nld))
                triplets.append((
                    rows.ravel().astype(np.int32),
                    cols.ravel().astype(np.int32),
                    jac.ravel(),
                ))

        n_chunks = len(self._chunks)
        if self.n_threads > 1 and n_chunks > 1:
            with ThreadPoolExecutor(max_workers=self.n_threads) as pool:
                futures = [
                    pool.submit(self._volume_kernel, i, U2, want_jacobian)
                    for i in range(n_chunks)
                ]
                for fut in futures:
                    accumulate(fut.result())
        else:
            for i in range(n_chunks):
                accumulate(self._volume_kernel(i, U2, want_jacobian))

        for bc in self.weak:
            accumulate(self._weak_bc_kernel(bc, U2, scale, want_jacobian))

        for load in self.loads:
            ft = self._face(load.face)
            t = self._traction_field(load)
            r = -scale * np.einsum("fqi,fqa,fq->fai", t, ft.N, ft.wdS)
            accumulate(self._pack(ft.elements, r, False))

        for load in self.edge_loads:
            et = self._edge(load.faces)
            t = _as_vector(load.vector, self.ncomp)
            r = -scale * np.einsum("i,fqa,fq->fai", t, et.N, et.wdL)
            accumulate(self._pack(et.elements, r, False))

        idx, val, mask = self._constraints
        R[idx] = U[idx] - scale * val
        if not want_jacobian:
            return R

        rows = np.concatenate([t[0] for t in triplets])
        cols = np.concatenate([t[1] for t in triplets])
        data = np.concatenate([t[2] for t in triplets])
        keep = ~(mask[rows] | mask[cols])
        rows = np.concatenate([rows[keep], idx.astype(np.int32)])
        cols = np.concatenate([cols[keep], idx.astype(np.int32)])
        data = np.concatenate([data[keep], np.ones(idx.size)])
        K = sp.coo_matrix(
            (data, (rows, cols)), shape=(self.ndof, self.ndof)
        ).tocsr()
        return R, K

    # -- energies -----------------------------------------------------------

    def energy_split(self, U: np.ndarray):
        """(local, gradient) strain energy integrated over the body."""
        U2 = np.asarray(U, dtype=np.float64).reshape(
            self.patch.n_control, self.ncomp
        )
        local = gradient = 0.0
        for i in range(len(self._chunks)):
            tables = self._vol(i)
            kin = self._kinematics_of(U2[self._conn[tables.elements]], tables)
            wl, wg = self.material.energy_parts(kin)
            local += float(np.einsum("eq,eq->", wl, tables.wdet))
            gradient += float(np.einsum("eq,eq->", wg, tables.wdet))
        return local, gradient

    def energy(self, U: np.ndarray) -> float:
        """Total strain energy at the given displacement coefficients."""
        return sum(self.energy_split(U))

    def sample_volume(self, U: np.ndarray):
        """Kinematics and stresses at all interior quadrature points.

        Returns (x, kinematics, P, B) with batches flattened over all
        elements, for post-processing such as pushforward to true
        stresses.
        """
        U2 = np.asarray(U, dtype=np.float64).reshape(
            self.patch.n_control, self.ncomp
        )
        xs, kins, Ps, Bs = [], [], [], []
        for i in range(len(self._chunks)):
            tables = self._vol(i)
            kin = self._kinematics_of(
                U2[self._conn[tables.elements]], tables, with_gradients=True
            )
            P, B = self.material.stresses(kin)
            if B is None:
                B = np.zeros(value_of(P).shape + (3,))
            xs.append(tables.x)
            kins.append(kin)
            Ps.append(P)
            Bs.append(B)
        x = np.concatenate(xs, axis=0)
        from .kinematics import Kinematics

        kin = Kinematics(
            np.concatenate([value_of(k.F) for k in kins], axis=0),
            np.concatenate([value_of(k.gradF) for k in kins], axis=0),
            np.concatenate([value_of(k.E) for k in kins], axis=0),
            np.concatenate([value_of(k.gradE) for k in kins], axis=0),
            np.concatenate([value_of(k.J) for k in kins], axis=0),
            self.finite,
        )
        P = np.concatenate([value_of(p) for p in Ps], axis=0)
        B = np.concatenate([value_of(b) for b in Bs], axis=0)
        return x, kin, P, B
