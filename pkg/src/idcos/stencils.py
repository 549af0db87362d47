"""Central finite-difference stencils of order 2, 4 or 6 along one grid axis.

Interior rows are the classical centered coefficients; Dirichlet rows within
reach of a wall switch to biased stencils of the same formal order that
reference only grid nodes and the wall itself.  Wall coefficients are kept
separate so the known boundary values enter as an additive contribution.
Weights are generated from an exact rational Vandermonde solve, so rows
annihilate constants exactly and differentiate polynomials of degree below
the stencil size without roundoff beyond a final float conversion.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
import math

import numpy as np
import scipy.sparse as sp

from .errors import UsageError

SUPPORTED_ORDERS = (2, 4, 6)


def _solve_rational(rows, rhs):
    """Gaussian elimination over Fractions for the small weight systems."""
    n = len(rhs)
    M = [row[:] + [rhs[i]] for i, row in enumerate(rows)]
    for col in range(n):
        pivot = next(r for r in range(col, n) if M[r][col] != 0)
        M[col], M[pivot] = M[pivot], M[col]
        inv = Fraction(1) / M[col][col]
        M[col] = [v * inv for v in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                factor = M[r][col]
                M[r] = [a - factor * b for a, b in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


@lru_cache(maxsize=None)
def fd_weights(offsets, derivative):
    """Finite-difference weights on integer offsets for the given derivative.

    Exact rational solve of  sum_k w_k * o_k^j = j! * [j == derivative],
    returned as floats; multiply by spacing**-derivative to use them.
    """
    offsets = tuple(offsets)
    p = len(offsets)
    if derivative >= p:
        raise UsageError("need more points than the derivative order")
    rows = [[Fraction(o) ** j for o in offsets] for j in range(p)]
    rhs = [Fraction(math.factorial(j)) if j == derivative else Fraction(0)
           for j in range(p)]
    w = _solve_rational(rows, rhs)
    return np.array([float(v) for v in w])


@dataclass(frozen=True)
class StencilOperator:
    """Differentiation along one axis of a 2D grid, as a per-line operator.

    ``matrix`` acts on the line's grid values; for Dirichlet lines,
    ``wall_left``/``wall_right`` hold the coefficients multiplying the known
    wall values (zero away from the walls).
    """

    axis: str                 # "x" or "y"
    derivative: int           # 1 or 2
    order: int                # formal order of accuracy
    n: int                    # nodes along the line
    spacing: float
    bc: str                   # "dirichlet" or "periodic"
    matrix: object            # (n, n) sparse matrix
    wall_left: np.ndarray = None
    wall_right: np.ndarray = None

    def apply_line(self, values, g_left=0.0, g_right=0.0):
        """Derivative of one line of data (wall values supplied for Dirichlet)."""
        out = self.matrix @ np.asarray(values)
        if self.bc == "dirichlet":
            out = out + self.wall_left * g_left + self.wall_right * g_right
        return out


def build_stencil(grid, axis, derivative, order):
    """Stencil operator for one axis of the grid.

    Dirichlet grids index the walls as extended nodes 0 and n+1; rows whose
    centered stencil would leave the grid use a one-sided stencil of
    ``order + derivative`` points anchored at the wall, which keeps the
    formal order and a bandwidth of at most six.
    """
    if axis not in ("x", "y"):
        raise UsageError(f"axis must be 'x' or 'y', got {axis!r}")
    if derivative not in (1, 2):
        raise UsageError(f"derivative must be 1 or 2, got {derivative}")
    if order not in SUPPORTED_ORDERS:
        raise UsageError(f"order must be one of {SUPPORTED_ORDERS}, got {order}")
    n = grid.N_x if axis == "x" else grid.N_y
    spacing = grid.dx if axis == "x" else grid.dy
    reach = order // 2
    biased_points = order + derivative
    scale = spacing ** (-derivative)

    if grid.bc == "periodic":
        if n < 2 * reach + 1:
            raise UsageError(f"periodic line of {n} nodes is too small for order {order}")
        w = fd_weights(tuple(range(-reach, reach + 1)), derivative) * scale
        rows, cols, vals = [], [], []
        for o, wo in zip(range(-reach, reach + 1), w):
            if wo == 0.0:
                continue
            idx = np.arange(n)
            rows.append(idx)
            cols.append((idx + o) % n)
            vals.append(np.full(n, wo))
        matrix = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n))
        return StencilOperator(axis=axis, derivative=derivative, order=order,
                               n=n, spacing=spacing, bc="periodic", matrix=matrix)

    if n < biased_points - 1:
        raise UsageError(f"Dirichlet line of {n} nodes is too small for order {order}")
    lil = sp.lil_matrix((n, n))
    wall_left = np.zeros(n)
    wall_right = np.zeros(n)
    for i in range(n):
        I = i + 1  # extended coordinate; walls at 0 and n+1
        if I - reach >= 0 and I + reach <= n + 1:
            ext = range(I - reach, I + reach + 1)
        elif I - reach < 0:
            ext = range(0, biased_points)
        else:
            ext = range(n + 2 - biased_points, n + 2)
        offs = tuple(e - I for e in ext)
        w = fd_weights(offs, derivative) * scale
        for e, we in zip(ext, w):
            if e == 0:
                wall_left[i] = we
            elif e == n + 1:
                wall_right[i] = we
            else:
                lil[i, e - 1] = we
    return StencilOperator(axis=axis, derivative=derivative, order=order,
                           n=n, spacing=spacing, bc="dirichlet",
                           matrix=lil.tocsr(), wall_left=wall_left,
                           wall_right=wall_right)
