"""Banded line systems with cached LU factors.

Grid-line operators from the finite-difference stencils are banded with
bandwidths at most six.  Periodic lines carry a handful of wrap entries in
the corners; they are handled as a banded core plus a low-rank correction
(Woodbury identity) so line solves stay O(n).
"""

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import LinearSolveError, UsageError


class BandedMatrix:
    """A factored banded matrix, optionally with a low-rank wrap correction."""

    def __init__(self, ab, kl, ku, wrap_cols=None, wrap_U=None, matvec_matrix=None):
        self.n = ab.shape[1]
        self.kl = kl
        self.ku = ku
        self._matrix = matvec_matrix
        gbtrf, gbtrs = scipy.linalg.get_lapack_funcs(("gbtrf", "gbtrs"), (ab,))
        self._gbtrs = gbtrs
        # gbtrf wants kl extra rows on top for fill-in
        work = np.zeros((2 * kl + ku + 1, self.n), dtype=ab.dtype, order="F")
        work[kl:, :] = ab
        lu, piv, info = gbtrf(work, kl, ku)
        if info != 0:
            raise LinearSolveError(f"banded LU factorization failed (info={info})")
        self._lu = lu
        self._piv = piv
        self._wrap = None
        if wrap_cols is not None and len(wrap_cols):
            Z = self._solve_core(wrap_U)
            cap = np.eye(len(wrap_cols), dtype=ab.dtype) + Z[wrap_cols, :]
            try:
                cap_lu = scipy.linalg.lu_factor(cap)
            except scipy.linalg.LinAlgError as exc:
                raise LinearSolveError("singular wrap correction") from exc
            self._wrap = (np.asarray(wrap_cols), Z, cap_lu)

    @classmethod
    def from_sparse(cls, A):
        """Build from a sparse line matrix; far-corner entries become the wrap."""
        A = sp.csr_matrix(A)
        n = A.shape[0]
        if A.shape[0] != A.shape[1]:
            raise UsageError("line matrices must be square")
        coo = A.tocoo()
        off = coo.col - coo.row
        cut = n // 2
        in_band = np.abs(off) <= cut
        kl = int(max(0, (-off[in_band]).max(initial=0)))
        ku = int(max(0, off[in_band].max(initial=0)))
        ab = np.zeros((kl + ku + 1, n), dtype=coo.data.dtype)
        wrap_vals = {}
        for i, j, v in zip(coo.row, coo.col, coo.data):
            if abs(j - i) <= cut:
                ab[ku + i - j, j] += v
            else:
                wrap_vals[(i, j)] = wrap_vals.get((i, j), 0.0) + v
        wrap_cols = sorted({j for _, j in wrap_vals})
        wrap_U = None
        if wrap_cols:
            col_index = {j: k for k, j in enumerate(wrap_cols)}
            wrap_U = np.zeros((n, len(wrap_cols)), dtype=ab.dtype)
            for (i, j), v in wrap_vals.items():
                wrap_U[i, col_index[j]] += v
        return cls(ab, kl, ku, wrap_cols=np.asarray(wrap_cols, dtype=int),
                   wrap_U=wrap_U, matvec_matrix=A)

    def _solve_core(self, b):
        x, info = self._gbtrs(self._lu, self.kl, self.ku,
                              np.asarray(b, order="F"), self._piv)
        if info != 0:
            raise LinearSolveError(f"banded solve failed (info={info})")
        return x

    def solve(self, b):
        """Solve A x = b for one vector (n,) or a batch (n, k)."""
        b = np.asarray(b)
        single = b.ndim == 1
        x = self._solve_core(b if not single else b[:, None])
        if self._wrap is not None:
            cols, Z, cap_lu = self._wrap
            x = x - Z @ scipy.linalg.lu_solve(cap_lu, x[cols, :])
        return x[:, 0] if single else x

    def matvec(self, x):
        if self._matrix is None:
            raise UsageError("matrix was built without an explicit matvec form")
        return self._matrix @ x
