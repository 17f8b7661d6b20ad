"""Tensor-product NURBS patches and element-wise evaluation tables.

A :class:`Patch` stores open knot vectors per parametric direction together
with a grid of control points and weights. :class:`TableBuilder` turns the
patch into the arrays Galerkin assembly consumes: basis values with first
and second physical derivatives at quadrature points, Jacobian-weighted
quadrature weights, face normals with surface measures, and edge measures.

Everything is batched over elements. Basis products across directions are
formed with einsum for the common uniform-weight case and fall back to a
pointwise rational evaluation otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .splines import (
    KnotVector,
    eval_basis,
    find_span,
    greville_points,
    rational_tensor_basis,
    uniform_open_knots,
)

__all__ = [
    "Patch",
    "box_patch",
    "make_quadrature",
    "geometry_map",
    "physical_basis",
    "enumerate_boundary",
    "TableBuilder",
    "VolumeTables",
    "FaceTables",
    "EdgeTables",
    "evaluate_field",
]

_AXIS_OF = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class Patch:
    """Tensor-product patch with control points on a structured grid.

    Parameters
    ----------
    knots : tuple of KnotVector
        One open knot vector per parametric direction.
    control : ndarray
        Control point grid, shape ``n_per_dir + (dim_phys,)``.
    weights : ndarray
        Positive rational weights, shape ``n_per_dir``.
    """

    knots: tuple
    control: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        n_per_dir = tuple(kv.n for kv in self.knots)
        if self.control.shape[:-1] != n_per_dir:
            raise ValueError(
                f"control grid {self.control.shape[:-1]} does not match "
                f"basis sizes {n_per_dir}"
            )
        if self.weights.shape != n_per_dir:
            raise ValueError("weight grid does not match basis sizes")
        if np.any(self.weights <= 0.0):
            raise ValueError("rational weights must be positive")

    @property
    def dim_param(self) -> int:
        return len(self.knots)

    @property
    def dim_phys(self) -> int:
        return self.control.shape[-1]

    @property
    def degrees(self) -> tuple:
        return tuple(kv.degree for kv in self.knots)

    @property
    def n_per_dir(self) -> tuple:
        return tuple(kv.n for kv in self.knots)

    @property
    def n_control(self) -> int:
        return int(np.prod(self.n_per_dir))

    @property
    def n_elements_per_dir(self) -> tuple:
        return tuple(kv.n_elements for kv in self.knots)

    @property
    def n_elements(self) -> int:
        return int(np.prod(self.n_elements_per_dir))

    @property
    def uniform_weights(self) -> bool:
        return bool(np.all(self.weights == self.weights.flat[0]))

    def connectivity(self) -> np.ndarray:
        """Global control point index per element and local function.

        Returns an int array of shape (n_elements, n_local) where both the
        element numbering and the local function numbering run in C order
        over the parametric directions, last direction fastest.
        """
        dim = self.dim_param
        ids_per_dir = []
        for kv in self.knots:
            first = kv.spans - kv.degree
            ids_per_dir.append(first[:, None] + np.arange(kv.degree + 1)[None, :])
        # Build g[e0, .., ed-1, j0, .., jd-1] by raveling the per-direction
        # control indices with the control grid strides.
        strides = np.cumprod((1,) + self.n_per_dir[:0:-1])[::-1]
        out = 0
        for d in range(dim):
            shape = [1] * (2 * dim)
            shape[d] = ids_per_dir[d].shape[0]
            shape[dim + d] = ids_per_dir[d].shape[1]
            out = out + strides[d] * ids_per_dir[d].reshape(shape)
        n_loc = int(np.prod([p + 1 for p in self.degrees]))
        return out.reshape(self.n_elements, n_loc)

    def element_multi_index(self, elements: np.ndarray) -> tuple:
        """Per-direction element indices for flat element ids."""
        return np.unravel_index(elements, self.n_elements_per_dir)

    def greville_grid(self) -> np.ndarray:
        """Greville abscissae as a parametric point grid, shape n_per_dir + (dim,)."""
        axes = [greville_points(kv) for kv in self.knots]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)


def box_patch(degrees, n_elements, lows, highs) -> Patch:
    """Axis-aligned box discretized with uniform open knot vectors.

    Control points sit at the Greville abscissae scaled to the box, which
    makes the geometry map affine on each element.

    Parameters
    ----------
    degrees : int or sequence of int
        Polynomial degree per direction.
    n_elements : sequence of int
        Element count per direction.
    lows, highs : sequence of float
        Box corners, one value per direction.
    """
    n_elements = tuple(int(n) for n in np.atleast_1d(n_elements))
    dim = len(n_elements)
    if np.isscalar(degrees):
        degrees = (int(degrees),) * dim
    lows = np.asarray(lows, dtype=np.float64).reshape(dim)
    highs = np.asarray(highs, dtype=np.float64).reshape(dim)
    if np.any(highs <= lows):
        raise ValueError("box extents must be positive")
    knots = tuple(
        uniform_open_knots(p, ne) for p, ne in zip(degrees, n_elements)
    )
    axes = [lo + (hi - lo) * greville_points(kv) for kv, lo, hi in zip(knots, lows, highs)]
    mesh = np.meshgrid(*axes, indexing="ij")
    control = np.stack(mesh, axis=-1)
    weights = np.ones(tuple(kv.n for kv in knots))
    return Patch(knots, control, weights)


def make_quadrature(kv: KnotVector, n_points: int) -> tuple:
    """Gauss-Legendre rule on every nonempty knot span.

    Returns (nodes, weights), each of shape (n_elements, n_points), with the
    span lengths folded into the weights.
    """
    if n_points < 1:
        raise ValueError("quadrature needs at least one point")
    g, w = np.polynomial.legendre.leggauss(n_points)
    lo = kv.knots[kv.spans]
    hi = kv.knots[kv.spans + 1]
    mid = 0.5 * (lo + hi)[:, None]
    half = 0.5 * (hi - lo)[:, None]
    return mid + half * g[None, :], half * w[None, :]


def geometry_map(N, dN, d2N, ctrl_loc):
    """Position, Jacobian, and map Hessian from local basis tables.

    Parameters are batched as (..., n_local[, dims]) with control points
    (..., n_local, dim_phys). Returns x (..., i), jac (..., i, A) with
    jac[i, A] = dx_i/dxi_A, and hess (..., i, A, B).
    """
    x = np.einsum("...a,...ai->...i", N, ctrl_loc)
    jac = np.einsum("...aA,...ai->...iA", dN, ctrl_loc)
    hess = np.einsum("...aAB,...ai->...iAB", d2N, ctrl_loc)
    return x, jac, hess


def physical_basis(dN_param, d2N_param, jac_inv, hess):
    """Push parametric basis derivatives to physical coordinates.

    Uses the second-order inverse chain rule. jac_inv carries indices
    [A, i] = dxi_A/dx_i and hess is the geometry map Hessian.
    """
    dN = np.einsum("...aA,...Ai->...ai", dN_param, jac_inv)
    bracket = d2N_param - np.einsum("...ai,...iAB->...aAB", dN, hess)
    d2N = np.einsum("...Ai,...aAB,...Bj->...aij", jac_inv, bracket, jac_inv)
    return dN, d2N


def enumerate_boundary(patch: Patch) -> dict:
    """Valid boundary face names mapped to (axis, side) pairs.

    Side 0 is the parametric minimum, side 1 the maximum. A patch of
    parametric dimension d exposes the first d coordinate names.
    """
    names = {}
    for letter, axis in _AXIS_OF.items():
        if axis >= patch.dim_param:
            continue
        names[f"{letter}min"] = (axis, 0)
        names[f"{letter}max"] = (axis, 1)
    return names


@dataclass
class VolumeTables:
    """Per-element interior quadrature data."""

    elements: np.ndarray  # (nel,) flat element ids
    N: np.ndarray  # (nel, nq, nloc)
    dN: np.ndarray  # (nel, nq, nloc, d)
    d2N: np.ndarray  # (nel, nq, nloc, d, d)
    wdet: np.ndarray  # (nel, nq)
    x: np.ndarray  # (nel, nq, d)


@dataclass
class FaceTables:
    """Volume basis traces and surface measures on one boundary face."""

    name: str
    elements: np.ndarray  # (nf,) flat element ids
    N: np.ndarray  # (nf, nq, nloc)
    dN: np.ndarray  # (nf, nq, nloc, d)
    d2N: np.ndarray  # (nf, nq, nloc, d, d)
    wdS: np.ndarray  # (nf, nq)
    normal: np.ndarray  # (nf, nq, d)
    x: np.ndarray  # (nf, nq, d)
    h: np.ndarray  # (nf,) element extent along the face normal


@dataclass
class EdgeTables:
    """Basis traces and arc measures along one boundary edge."""

    name: tuple
    elements: np.ndarray  # (ne,) flat element ids
    N: np.ndarray  # (ne, nq, nloc)
    wdL: np.ndarray  # (ne, nq)
    x: np.ndarray  # (ne, nq, d)


class _DirectionTable:
    """Basis values of one direction at its per-span quadrature points."""

    def __init__(self, kv: KnotVector, n_points: int):
        self.nodes, self.weights = make_quadrature(kv, n_points)
        ne, nq = self.nodes.shape
        nloc = kv.degree + 1
        self.B = np.empty((ne, nq, nloc, 3))
        for e in range(ne):
            for q in range(nq):
                b = eval_basis(kv, self.nodes[e, q])
                self.B[e, q, :, 0] = b.values
                self.B[e, q, :, 1] = b.d1
                self.B[e, q, :, 2] = b.d2


def _boundary_direction_table(kv: KnotVector, side: int) -> _DirectionTable:
    """Single-point 'rule' pinned at one end of the parametric domain."""
    xi = kv.domain[side]
    table = _DirectionTable.__new__(_DirectionTable)
    e = 0 if side == 0 else kv.n_elements - 1
    table.nodes = np.array([[xi]])
    table.weights = np.array([[1.0]])
    b = eval_basis(kv, xi)
    table.B = np.empty((1, 1, kv.degree + 1, 3))
    table.B[0, 0, :, 0] = b.values
    table.B[0, 0, :, 1] = b.d1
    table.B[0, 0, :, 2] = b.d2
    table.element = e
    return table


class TableBuilder:
    """Builds volume, face, and edge quadrature tables for one patch.

    Per-direction basis evaluations are computed once at construction;
    element tables are then assembled on demand as tensor products, one
    batch of elements at a time.

    Parameters
    ----------
    patch : Patch
    n_points : int or sequence of int, optional
        Quadrature points per direction; defaults to degree + 1.
    """

    def __init__(self, patch: Patch, n_points=None):
        self.patch = patch
        dim = patch.dim_param
        if n_points is None:
            pts = tuple(p + 1 for p in patch.degrees)
        elif np.isscalar(n_points):
            pts = (int(n_points),) * dim
        else:
            pts = tuple(int(n) for n in n_points)
        self.n_points = pts
        self._dirs = [_DirectionTable(kv, n) for kv, n in zip(patch.knots, pts)]
        self._conn = patch.connectivity()
        self._ctrl_flat = patch.control.reshape(patch.n_control, patch.dim_phys)
        self._wts_flat = patch.weights.reshape(patch.n_control)

    @property
    def connectivity(self) -> np.ndarray:
        return self._conn

    @property
    def n_local(self) -> int:
        return self._conn.shape[1]

    @property
    def nq_volume(self) -> int:
        return int(np.prod(self.n_points))

    # -- tensor-product assembly -------------------------------------------

    def _combine(self, dir_blocks):
        """Tensor products of per-direction basis blocks over a batch.

        dir_blocks is a list of (nel, nq_d, nloc_d, 3) arrays already
        gathered for the batch. Returns parametric N (nel, nq, nloc),
        dN (nel, nq, nloc, d), d2N (nel, nq, nloc, d, d) with the
        quadrature and local numbering in C order, last direction fastest.
        """
        dim = len(dir_blocks)
        nel = dir_blocks[0].shape[0]
        nq = int(np.prod([b.shape[1] for b in dir_blocks]))
        nloc = int(np.prod([b.shape[2] for b in dir_blocks]))

        def product(orders):
            specs = {1: "eqj->eqj", 2: "eqj,erk->eqrjk", 3: "eqj,erk,esl->eqrsjkl"}
            ops = [dir_blocks[d][..., orders[d]] for d in range(dim)]
            out = np.einsum(specs[dim], *ops, optimize=True)
            return out.reshape(nel, nq, nloc)

        N = product([0] * dim)
        dN = np.empty((nel, nq, nloc, dim))
        for a in range(dim):
            orders = [0] * dim
            orders[a] = 1
            dN[..., a] = product(orders)
        d2N = np.empty((nel, nq, nloc, dim, dim))
        for a in range(dim):
            for b in range(a, dim):
                orders = [0] * dim
                orders[a] += 1
                orders[b] += 1
                block = product(orders)
                d2N[..., a, b] = block
                d2N[..., b, a] = block
        return N, dN, d2N

    def _rationalize(self, elements, N, dN, d2N):
        """Apply the rational quotient rule per point when weights vary."""
        if self.patch.uniform_weights:
            return N, dN, d2N
        w = self._wts_flat[self._conn[elements]]  # (nel, nloc)
        W = np.einsum("eqa,ea->eq", N, w)
        Wg = np.einsum("eqaA,ea->eqA", dN, w)
        Wh = np.einsum("eqaAB,ea->eqAB", d2N, w)
        wN = w[:, None, :]
        R = wN * N / W[..., None]
        dR = (
            wN[..., None] * dN
            - R[..., None] * Wg[:, :, None, :]
        ) / W[..., None, None]
        d2R = (
            wN[..., None, None] * d2N
            - dR[..., :, None] * Wg[:, :, None, None, :]
            - Wg[:, :, None, :, None] * dR[..., None, :]
            - R[..., None, None] * Wh[:, :, None, :, :]
        ) / W[..., None, None, None]
        return R, dR, d2R

    def _parametric(self, elements, dirs=None):
        """Parametric basis tables and quadrature weights for a batch."""
        dirs = dirs if dirs is not None else self._dirs
        multi = np.unravel_index(elements, self.patch.n_elements_per_dir)
        # Pinned boundary directions carry a single-row table; map every
        # element of the batch onto that row.
        multi = [
            m if d.B.shape[0] > 1 else np.zeros_like(m)
            for d, m in zip(dirs, multi)
        ]
        blocks = [d.B[m] for d, m in zip(dirs, multi)]
        N, dN, d2N = self._combine(blocks)
        w_blocks = [d.weights[m] for d, m in zip(dirs, multi)]
        specs = {1: "eq->eq", 2: "eq,er->eqr", 3: "eq,er,es->eqrs"}
        wq = np.einsum(specs[len(dirs)], *w_blocks, optimize=True)
        nel = len(elements)
        return N, dN, d2N, wq.reshape(nel, -1)

    def _physical(self, elements, dirs=None):
        """Physical basis tables plus map data for a batch of elements."""
        N, dNp, d2Np, wq = self._parametric(elements, dirs)
        N, dNp, d2Np = self._rationalize(elements, N, dNp, d2Np)
        # Insert a singleton quadrature axis so the control block
        # broadcasts against the per-point basis tables.
        ctrl = self._ctrl_flat[self._conn[elements]][:, None]
        x, jac, hess = geometry_map(N, dNp, d2Np, ctrl)
        det = np.linalg.det(jac)
        if np.any(det <= 0.0):
            raise ValueError("geometry map has non-positive Jacobian")
        jac_inv = np.linalg.inv(jac)
        dN, d2N = physical_basis(dNp, d2Np, jac_inv, hess)
        return N, dN, d2N, x, jac, jac_inv, det, wq

    # -- public table construction ------------------------------------------

    def volume(self, elements=None) -> VolumeTables:
        """Interior tables for the given flat element ids (default all)."""
        if elements is None:
            elements = np.arange(self.patch.n_elements)
        elements = np.asarray(elements, dtype=np.intp)
        N, dN, d2N, x, _, _, det, wq = self._physical(elements)
        return VolumeTables(elements, N, dN, d2N, det * wq, x)

    def _face_spec(self, name: str):
        valid = enumerate_boundary(self.patch)
        if name not in valid:
            raise KeyError(f"unknown boundary face '{name}'")
        return valid[name]

    def face_elements(self, name: str) -> np.ndarray:
        """Flat ids of the elements adjacent to a named face."""
        axis, side = self._face_spec(name)
        ne = self.patch.n_elements_per_dir
        grids = [np.arange(n) for n in ne]
        grids[axis] = np.array([0 if side == 0 else ne[axis] - 1])
        mesh = np.meshgrid(*grids, indexing="ij")
        return np.ravel_multi_index([m.ravel() for m in mesh], ne)

    def face(self, name: str) -> FaceTables:
        """Tables on one boundary face, including normals and measures."""
        axis, side = self._face_spec(name)
        elements = self.face_elements(name)
        dirs = list(self._dirs)
        dirs[axis] = _boundary_direction_table(self.patch.knots[axis], side)
        N, dN, d2N, x, jac, jac_inv, det, wq = self._physical(elements, dirs)
        sign = -1.0 if side == 0 else 1.0
        # Nanson formula: the weighted normal is det(J) J^{-T} nu with nu
        # the parametric outward normal along the pinned axis.
        nvec = sign * det[..., None] * jac_inv[..., axis, :]
        scale = np.linalg.norm(nvec, axis=-1)
        normal = nvec / scale[..., None]
        h = self._face_extent(elements, axis, normal[:, 0, :])
        return FaceTables(name, elements, N, dN, d2N, scale * wq, normal, x, h)

    def _face_extent(self, elements, axis, normal) -> np.ndarray:
        """Element size along the face normal, one value per face element."""
        patch = self.patch
        multi = np.unravel_index(elements, patch.n_elements_per_dir)
        pts = []
        for endpoint in (0, 1):
            coords = []
            for d, kv in enumerate(patch.knots):
                span = kv.spans[multi[d]]
                lo, hi = kv.knots[span], kv.knots[span + 1]
                if d == axis:
                    coords.append(np.where(endpoint == 0, lo, hi))
                else:
                    coords.append(0.5 * (lo + hi))
            pts.append(np.stack(coords, axis=-1))
        x_lo = _map_points(patch, pts[0])
        x_hi = _map_points(patch, pts[1])
        return np.abs(np.einsum("fi,fi->f", x_hi - x_lo, normal))

    def edge(self, names) -> EdgeTables:
        """Tables along the edge shared by two named faces (3D patches)."""
        if self.patch.dim_param != 3:
            raise ValueError("edges are defined for 3D patches only")
        specs = [self._face_spec(n) for n in names]
        if len(specs) != 2 or specs[0][0] == specs[1][0]:
            raise ValueError("an edge needs two faces on distinct axes")
        pinned = dict(specs)
        free = [d for d in range(3) if d not in pinned][0]
        ne = self.patch.n_elements_per_dir
        grids = [np.arange(n) for n in ne]
        for axis, side in pinned.items():
            grids[axis] = np.array([0 if side == 0 else ne[axis] - 1])
        mesh = np.meshgrid(*grids, indexing="ij")
        elements = np.ravel_multi_index([m.ravel() for m in mesh], ne)
        dirs = list(self._dirs)
        for axis, side in pinned.items():
            dirs[axis] = _boundary_direction_table(self.patch.knots[axis], side)
        N, dNp, d2Np, wq = self._parametric(elements, dirs)
        N, dNp, d2Np = self._rationalize(elements, N, dNp, d2Np)
        ctrl = self._ctrl_flat[self._conn[elements]][:, None]
        x, jac, _ = geometry_map(N, dNp, d2Np, ctrl)
        tangent = jac[..., free]
        wdL = np.linalg.norm(tangent, axis=-1) * wq
        return EdgeTables(tuple(names), elements, N, wdL, x)


def _map_points(patch: Patch, pts: np.ndarray) -> np.ndarray:
    """Geometry map at arbitrary parametric points, shape (npts, dim)."""
    pts = np.atleast_2d(pts)
    out = np.empty((pts.shape[0], patch.dim_phys))
    for k, xi in enumerate(pts):
        out[k] = _eval_point(patch, xi)[0]
    return out


def _local_basis_at(patch: Patch, xi) -> tuple:
    """Rational basis and global support indices at one parametric point."""
    bevals = [eval_basis(kv, float(x)) for kv, x in zip(patch.knots, xi)]
    idx_per_dir = [
        np.arange(b.span - kv.degree, b.span + 1)
        for b, kv in zip(bevals, patch.knots)
    ]
    strides = np.cumprod((1,) + patch.n_per_dir[:0:-1])[::-1]
    flat = 0
    dim = patch.dim_param
    for d in range(dim):
        shape = [1] * dim
        shape[d] = idx_per_dir[d].size
        flat = flat + strides[d] * idx_per_dir[d].reshape(shape)
    w_local = patch.weights.reshape(-1)[flat]
    N, dN, d2N = rational_tensor_basis(bevals, w_local)
    return N, dN, d2N, flat.ravel()


def _eval_point(patch: Patch, xi) -> tuple:
    """Position, Jacobian, and Hessian of the geometry map at one point."""
    N, dN, d2N, flat = _local_basis_at(patch, xi)
    ctrl = patch.control.reshape(-1, patch.dim_phys)[flat]
    return geometry_map(N, dN, d2N, ctrl)


def evaluate_field(patch: Patch, coeffs: np.ndarray, pts, nderiv: int = 0):
    """Evaluate a control-coefficient field at parametric points.

    Parameters
    ----------
    patch : Patch
    coeffs : ndarray
        Coefficients per control point, shape (n_control, ncomp).
    pts : ndarray
        Parametric evaluation points, shape (npts, dim_param).
    nderiv : int
        0 returns values (npts, ncomp); 1 adds physical gradients
        (npts, ncomp, d); 2 adds physical Hessians (npts, ncomp, d, d).

    Returns
    -------
    ndarray or tuple of ndarray
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    coeffs = np.asarray(coeffs, dtype=np.float64)
    npts = pts.shape[0]
    ncomp = coeffs.shape[1]
    d = patch.dim_phys
    vals = np.empty((npts, ncomp))
    grads = np.empty((npts, ncomp, d)) if nderiv >= 1 else None
    hesss = np.empty((npts, ncomp, d, d)) if nderiv >= 2 else None
    for k, xi in enumerate(pts):
        N, dNp, d2Np, flat = _local_basis_at(patch, xi)
        u_loc = coeffs[flat]
        vals[k] = N @ u_loc
        if nderiv >= 1:
            ctrl = patch.control.reshape(-1, d)[flat]
            _, jac, hess = geometry_map(N, dNp, d2Np, ctrl)
            jac_inv = np.linalg.inv(jac)
            dN, d2N = physical_basis(dNp, d2Np, jac_inv, hess)
            grads[k] = np.einsum("aA,ac->cA", dN, u_loc)
            if nderiv >= 2:
                hesss[k] = np.einsum("aAB,ac->cAB", d2N, u_loc)
    if nderiv == 0:
        return vals
    if nderiv == 1:
        return vals, grads
    return vals, grads, hesss
