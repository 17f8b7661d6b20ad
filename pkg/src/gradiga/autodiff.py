"""Forward-mode differentiation on batched arrays.

A :class:`Dual` pairs an ndarray of values with an ndarray of directional
derivatives that carries one extra trailing axis, the seed axis. Arithmetic
and einsum contractions propagate the seed block by the chain rule, so an
element residual evaluated on lifted degrees of freedom carries its exact
elemental Jacobian along with it.

Physics kernels are written against plain arithmetic plus :func:`ein`, so a
single code path serves both the real-valued evaluation and the augmented
one. The value part of every operation is produced by the same numpy call
in both modes, which makes the augmented value bitwise identical to the
plain evaluation.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Dual", "ein", "lift", "extract_jacobian", "value_of", "det3", "inv3"]

_SEED_LABEL = "z"


class Dual:
    """Batched values with a dense seed axis of directional derivatives.

    Parameters
    ----------
    val : ndarray
        Values of any shape.
    dot : ndarray
        Derivatives with shape ``val.shape + (nseed,)``.
    """

    # Keep numpy from consuming Dual operands in mixed expressions; the
    # reflected operators below handle ndarray-with-Dual arithmetic.
    __array_ufunc__ = None
    __slots__ = ("val", "dot")

    def __init__(self, val, dot) -> None:
        self.val = np.asarray(val)
        self.dot = np.asarray(dot)
        if self.dot.shape[:-1] != self.val.shape:
            raise ValueError(
                f"seed block shape {self.dot.shape} does not extend value "
                f"shape {self.val.shape} by one axis"
            )

    @classmethod
    def zeros(cls, shape, nseed: int) -> "Dual":
        return cls(np.zeros(shape), np.zeros(tuple(shape) + (nseed,)))

    @property
    def nseed(self) -> int:
        return self.dot.shape[-1]

    @property
    def shape(self):
        return self.val.shape

    # -- indexing ---------------------------------------------------------

    @staticmethod
    def _seed_key(key):
        if isinstance(key, tuple):
            return key + (slice(None),)
        return key

    def __getitem__(self, key) -> "Dual":
        return Dual(self.val[key], self.dot[self._seed_key(key)])

    def __setitem__(self, key, value) -> None:
        if isinstance(value, Dual):
            self.val[key] = value.val
            self.dot[self._seed_key(key)] = value.dot
        else:
            self.val[key] = value
            self.dot[self._seed_key(key)] = 0.0

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.dot + other.dot)
        return Dual(self.val + other, _extend(self.dot, np.shape(other)))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val - other.val, self.dot - other.dot)
        return Dual(self.val - other, _extend(self.dot, np.shape(other)))

    def __rsub__(self, other):
        return Dual(other - self.val, -_extend(self.dot, np.shape(other)))

    def __neg__(self):
        return Dual(-self.val, -self.dot)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(
                self.val * other.val,
                self.dot * other.val[..., None] + self.val[..., None] * other.dot,
            )
        other = np.asarray(other)
        return Dual(self.val * other, self.dot * other[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.val
            val = self.val * inv
            return Dual(val, (self.dot - val[..., None] * other.dot) * inv[..., None])
        other = np.asarray(other)
        return Dual(self.val / other, self.dot / other[..., None])

    def __rtruediv__(self, other):
        other = np.asarray(other)
        val = other / self.val
        return Dual(val, -(val / self.val)[..., None] * self.dot)

    def __pow__(self, power):
        if not np.isscalar(power):
            raise TypeError("only scalar exponents are supported")
        val = self.val ** power
        return Dual(val, (power * self.val ** (power - 1))[..., None] * self.dot)

    # -- elementary functions ---------------------------------------------

    def exp(self) -> "Dual":
        e = np.exp(self.val)
        return Dual(e, e[..., None] * self.dot)

    def log(self) -> "Dual":
        return Dual(np.log(self.val), self.dot / self.val[..., None])

    def sqrt(self) -> "Dual":
        r = np.sqrt(self.val)
        return Dual(r, self.dot / (2.0 * r[..., None]))

    def swap(self, ax1: int = -2, ax2: int = -1) -> "Dual":
        """Swap two value axes, given as negative indices."""
        if ax1 >= 0 or ax2 >= 0:
            raise ValueError("axes must be negative indices")
        return Dual(
            np.swapaxes(self.val, ax1, ax2),
            np.swapaxes(self.dot, ax1 - 1, ax2 - 1),
        )

    def reshape(self, *shape) -> "Dual":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return Dual(
            self.val.reshape(shape),
            self.dot.reshape(tuple(shape) + (self.nseed,)),
        )

    def __repr__(self) -> str:  # pragma: no cover
        return f"Dual(shape={self.val.shape}, nseed={self.nseed})"


def _extend(dot: np.ndarray, other_shape) -> np.ndarray:
    """Broadcast a seed block against the value-shape of a plain operand."""
    target = np.broadcast_shapes(dot.shape[:-1], tuple(other_shape))
    if target == dot.shape[:-1]:
        return dot
    return np.broadcast_to(dot[..., :], target + (dot.shape[-1],))


def value_of(x):
    """Value part of a Dual, or the input itself for plain arrays."""
    return x.val if isinstance(x, Dual) else x


def ein(spec: str, *ops):
    """Einsum that applies the product rule across Dual operands.

    The subscript specification must contain an explicit ``->`` output and
    may use ``...`` for shared batch axes. The label ``z`` is reserved for
    the seed axis.
    """
    if "->" not in spec:
        raise ValueError("einsum specification needs an explicit '->' output")
    if _SEED_LABEL in spec:
        raise ValueError(f"subscript label '{_SEED_LABEL}' is reserved")
    if not any(isinstance(o, Dual) for o in ops):
        return np.einsum(spec, *ops, optimize=True)

    in_terms, out = spec.split("->")
    terms = in_terms.split(",")
    vals = [value_of(o) for o in ops]
    val = np.einsum(spec, *vals, optimize=True)
    dot = None
    for i, op in enumerate(ops):
        if not isinstance(op, Dual):
            continue
        seeded = list(terms)
        seeded[i] = seeded[i] + _SEED_LABEL
        args = list(vals)
        args[i] = op.dot
        term = np.einsum(
            ",".join(seeded) + "->" + out + _SEED_LABEL, *args, optimize=True
        )
        dot = term if dot is None else dot + term
    return Dual(val, dot)


def lift(dofs: np.ndarray, n_batch_axes: int = 0) -> Dual:
    """Attach identity seeds to a block of degrees of freedom.

    Entry j of the flattened non-batch axes receives unit seed vector j,
    so derivatives extracted later are with respect to exactly these
    degrees of freedom in flattening order.

    Parameters
    ----------
    dofs : ndarray
        Degree-of-freedom values; leading ``n_batch_axes`` axes are
        independent batch members that share the seed numbering.
    n_batch_axes : int
        Number of leading batch axes.
    """
    dofs = np.asarray(dofs, dtype=np.float64)
    local_shape = dofs.shape[n_batch_axes:]
    n = int(np.prod(local_shape)) if local_shape else 1
    eye = np.eye(n).reshape(local_shape + (n,))
    # Materialized (not broadcast) so the result stays writable for
    # callers that overwrite entries, e.g. to pin a degree of freedom.
    dot = np.broadcast_to(
        eye, dofs.shape[:n_batch_axes] + local_shape + (n,)
    ).copy()
    return Dual(dofs, dot)


def extract_jacobian(residual: Dual) -> np.ndarray:
    """Dense Jacobian block carried by an augmented residual.

    For a residual with value shape ``(..., n)`` the result has shape
    ``(..., n, nseed)``; entry (r, c) is the derivative of residual entry
    r with respect to lifted degree of freedom c.
    """
    if not isinstance(residual, Dual):
        raise TypeError("residual was not computed through augmented arithmetic")
    return residual.dot


def det3(F):
    """Determinant of a batch of 3x3 matrices, Dual aware."""
    c0 = F[..., 1, 1] * F[..., 2, 2] - F[..., 1, 2] * F[..., 2, 1]
    c1 = F[..., 1, 2] * F[..., 2, 0] - F[..., 1, 0] * F[..., 2, 2]
    c2 = F[..., 1, 0] * F[..., 2, 1] - F[..., 1, 1] * F[..., 2, 0]
    return F[..., 0, 0] * c0 + F[..., 0, 1] * c1 + F[..., 0, 2] * c2


def inv3(F):
    """Inverse of a batch of 3x3 matrices via cofactors, Dual aware."""
    det = det3(F)
    rows = []
    for i in range(3):
        cols = []
        for j in range(3):
            a, b = (j + 1) % 3, (j + 2) % 3
            c, d = (i + 1) % 3, (i + 2) % 3
            cols.append(F[..., a, c] * F[..., b, d] - F[..., a, d] * F[..., b, c])
        rows.append(cols)
    if isinstance(F, Dual):
        out = Dual.zeros(F.shape, F.nseed)
    else:
        out = np.zeros_like(F)
    for i in range(3):
        for j in range(3):
            out[..., i, j] = rows[i][j] / det
    return out
