"""Univariate B-spline and rational (NURBS) basis evaluation.

Open (clamped) knot vectors only. Values and the first two parametric
derivatives are computed with the standard knot-difference recursions
(Piegl & Tiller, The NURBS Book, algorithms A2.1 and A2.2), so derivatives
are exact rather than numerical. Rational and tensor-product composition
with full second-order quotient-rule expansion lives in
:func:`rational_tensor_basis`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "KnotVector",
    "BasisEval",
    "uniform_open_knots",
    "find_span",
    "eval_basis",
    "greville_points",
    "rational_tensor_basis",
]


class KnotVector:
    """Degree and non-decreasing knot sequence for one parametric direction.

    Only open (clamped) vectors are accepted: the first and last knot
    values must each repeat exactly ``degree + 1`` times so that the basis
    interpolates the ends of the parametric domain. Boundary interpolation
    is what allows Dirichlet data to be imposed by constraining boundary
    control points.

    Parameters
    ----------
    degree : int
        Polynomial degree p, at least 1.
    knots : array_like
        Non-decreasing sequence of length ``n + p + 1`` where n is the
        number of basis functions.
    """

    def __init__(self, degree: int, knots) -> None:
        degree = int(degree)
        if degree < 1:
            raise ValueError(f"degree must be at least 1, got {degree}")
        knots = np.ascontiguousarray(knots, dtype=np.float64)
        if knots.ndim != 1:
            raise ValueError("knots must be a one dimensional sequence")
        if len(knots) < 2 * (degree + 1):
            raise ValueError(
                f"need at least {2 * (degree + 1)} knots for degree {degree}, "
                f"got {len(knots)}"
            )
        if np.any(np.diff(knots) < 0.0):
            raise ValueError("knots must be non-decreasing")
        # Clamped ends: exact multiplicity p + 1 at both ends.
        p = degree
        if not (knots[0] == knots[p] and knots[p] < knots[p + 1]):
            raise ValueError("first knot must repeat exactly degree + 1 times")
        if not (knots[-1] == knots[-(p + 1)] and knots[-(p + 2)] < knots[-(p + 1)]):
            raise ValueError("last knot must repeat exactly degree + 1 times")
        values, counts = np.unique(knots, return_counts=True)
        if np.any(counts > p + 1):
            raise ValueError("knot multiplicity may not exceed degree + 1")
        self.degree = p
        self.knots = knots
        self.knots.setflags(write=False)

    @property
    def n(self) -> int:
        """Number of basis functions."""
        return len(self.knots) - self.degree - 1

    @property
    def domain(self) -> tuple[float, float]:
        """Parametric interval spanned by the basis."""
        return float(self.knots[self.degree]), float(self.knots[self.n])

    @property
    def spans(self) -> np.ndarray:
        """Indices s of the nonempty knot spans [knots[s], knots[s+1])."""
        k = self.knots
        idx = np.nonzero(k[:-1] < k[1:])[0]
        return idx[(idx >= self.degree) & (idx < self.n)]

    @property
    def n_elements(self) -> int:
        return len(self.spans)

    def __repr__(self) -> str:  # pragma: no cover
        return f"KnotVector(degree={self.degree}, n={self.n})"


@dataclass
class BasisEval:
    """Nonzero basis values and derivatives on one knot span.

    ``values[j]`` belongs to basis function ``span - degree + j``. The
    derivative arrays are per unit parametric length (d1) and per unit
    parametric length squared (d2); entries beyond the requested number of
    derivatives are zero.
    """

    span: int
    values: np.ndarray
    d1: np.ndarray
    d2: np.ndarray


def uniform_open_knots(degree: int, n_elements: int, start: float = 0.0,
                       end: float = 1.0) -> KnotVector:
    """Open knot vector with ``n_elements`` equal spans on [start, end]."""
    if n_elements < 1:
        raise ValueError("need at least one element")
    if not end > start:
        raise ValueError("domain end must exceed start")
    interior = np.linspace(start, end, n_elements + 1)[1:-1]
    knots = np.concatenate([
        np.full(degree + 1, start), interior, np.full(degree + 1, end)
    ])
    return KnotVector(degree, knots)


def find_span(kv: KnotVector, xi: float) -> int:
    """Index s of the knot span with knots[s] <= xi < knots[s+1].

    The parametric domain is right closed: xi equal to the domain end maps
    to the last nonempty span.
    """
    p, k, n = kv.degree, kv.knots, kv.n
    lo, hi = kv.domain
    if not (lo <= xi <= hi):
        raise ValueError(f"parameter {xi} outside domain [{lo}, {hi}]")
    if xi >= k[n]:
        # Right end of the domain: step back over any repeated end knots.
        s = n - 1
        while k[s] == k[s + 1]:
            s -= 1
        return s
    return int(np.searchsorted(k, xi, side="right") - 1)


def eval_basis(kv: KnotVector, xi: float, nderiv: int = 2) -> BasisEval:
    """Nonzero B-spline basis values and derivatives at one parameter.

    Uses the knot-difference table recursion, which resolves the 0/0
    convention of the Cox-de Boor formula to 0 by never forming the
    offending quotients.

    Parameters
    ----------
    kv : KnotVector
    xi : float
        Parameter inside the knot vector's domain.
    nderiv : int
        Number of derivatives, 0 to 2.

    Returns
    -------
    BasisEval
        ``degree + 1`` values with first and second derivatives (zeros for
        orders beyond ``nderiv``).
    """
    if nderiv not in (0, 1, 2):
        raise ValueError("nderiv must be 0, 1 or 2")
    p = kv.degree
    U = kv.knots
    s = find_span(kv, xi)

    # Triangular table of all lower-degree bases (A2.2 working arrays).
    ndu = np.empty((p + 1, p + 1))
    left = np.empty(p + 1)
    right = np.empty(p + 1)
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = xi - U[s + 1 - j]
        right[j] = U[s + j] - xi
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((3, p + 1))
    ders[0] = ndu[:, p]
    nd = min(nderiv, p)

    # Derivative part of A2.2: alternating difference quotients of the
    # lower-degree table.
    a = np.zeros((2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k_ord in range(1, nd + 1):
            d = 0.0
            rk = r - k_ord
            pk = p - k_ord
            if r >= k_ord:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k_ord - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k_ord] = -a[s1, k_ord - 1] / ndu[pk + 1, r]
                d += a[s2, k_ord] * ndu[r, pk]
            ders[k_ord, r] = d
            s1, s2 = s2, s1

    fac = float(p)
    for k_ord in range(1, nd + 1):
        ders[k_ord] *= fac
        fac *= p - k_ord

    return BasisEval(span=s, values=ders[0], d1=ders[1], d2=ders[2])


def greville_points(kv: KnotVector) -> np.ndarray:
    """Greville abscissae, the averages of ``degree`` consecutive knots.

    A control net sampled from a polynomial of degree one at these points
    reproduces that polynomial exactly, which is what makes them the
    natural anchor points of the basis.
    """
    p, k = kv.degree, kv.knots
    return np.array([k[i + 1:i + p + 1].mean() for i in range(kv.n)])


def rational_tensor_basis(bevals: list[BasisEval], weights: np.ndarray):
    """Tensor-product NURBS values with parametric gradient and Hessian.

    Parameters
    ----------
    bevals : list of BasisEval
        One per parametric direction (1 to 3 directions).
    weights : ndarray
        Local weights with shape ``(p1+1, ..., pdim+1)`` matching the
        nonzero functions of each direction, all strictly positive.

    Returns
    -------
    N : ndarray, shape (nloc,)
    dN : ndarray, shape (nloc, dim)
        Per unit parametric length.
    d2N : ndarray, shape (nloc, dim, dim)
        Symmetric parametric Hessian.

    Notes
    -----
    Local functions are numbered with the last direction fastest, matching
    a C-order flattening of the per-direction indices. With uniform
    weights the rational construction collapses to the plain tensor
    product, which is returned without forming any quotients.
    """
    dim = len(bevals)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != tuple(len(b.values) for b in bevals):
        raise ValueError("weights shape does not match local basis counts")
    if np.any(weights <= 0.0):
        raise ValueError("weights must be strictly positive")

    # Plain tensor-product values and parametric derivatives.
    V = bevals[0].values
    for b in bevals[1:]:
        V = np.multiply.outer(V, b.values)
    dV = np.empty(V.shape + (dim,))
    d2V = np.empty(V.shape + (dim, dim))
    for a in range(dim):
        t = bevals[0].d1 if a == 0 else bevals[0].values
        for j, b in enumerate(bevals[1:], start=1):
            t = np.multiply.outer(t, b.d1 if j == a else b.values)
        dV[..., a] = t
    for a in range(dim):
        for b_ax in range(a, dim):
            t = None
            for j, b in enumerate(bevals):
                if j == a and j == b_ax:
                    f = b.d2
                elif j in (a, b_ax):
                    f = b.d1
                else:
                    f = b.values
                t = f if t is None else np.multiply.outer(t, f)
            d2V[..., a, b_ax] = t
            d2V[..., b_ax, a] = t

    nloc = V.size
    V = V.reshape(nloc)
    dV = dV.reshape(nloc, dim)
    d2V = d2V.reshape(nloc, dim, dim)
    w = weights.reshape(nloc)

    if np.all(w == w[0]):
        # Constant weights cancel from the quotient; return the polynomial
        # basis exactly.
        return V, dV, d2V

    wV = w * V
    W = wV.sum()
    Wg = (w[:, None] * dV).sum(axis=0)
    Wh = (w[:, None, None] * d2V).sum(axis=0)
    N = wV / W
    dN = (w[:, None] * dV - N[:, None] * Wg) / W
    d2N = (
        w[:, None, None] * d2V
        - dN[:, :, None] * Wg[None, None, :]
        - dN[:, None, :] * Wg[None, :, None]
        - N[:, None, None] * Wh
    ) / W
    return N, dN, d2N
