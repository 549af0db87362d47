"""Core problem and solution containers shared by the steppers and the IDC driver.

A split initial value problem is  u' = f(t,u) = f_1(t,u) + ... + f_L(t,u).
Operators are plain callables ``f(t, u) -> array``.  An operator object may
additionally provide

``solve_implicit(t, alpha, rhs, guess, newton)``
    returning x with  x - alpha*f(t, x) = rhs.  Steppers use this fast path
    when present (direct division for diagonal operators, banded line solves
    for discretized diffusion); otherwise they fall back to Newton.

``jacobian(t, u)``
    df/du as a dense matrix on the flattened state, consumed by Newton.

States are numpy arrays of any shape and any scalar kind; complex states are
used by the linear stability scans and run through the same code paths.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import EvaluationError, PoleError, UsageError


@dataclass(frozen=True)
class SplitIVP:
    """Initial value problem whose right-hand side is a sum of operators."""

    operators: tuple
    initial_state: np.ndarray
    t_span: tuple
    jacobians: Optional[tuple] = None
    rhs_total: Optional[Callable] = None
    # optional specialized one-step methods, keyed by scheme name; used by
    # the IDC prediction step (e.g. the factored ADI sweep for linear PDEs)
    predictor_overrides: dict = field(default_factory=dict)
    # optional specialized correction sub-steps, keyed by scheme name, with
    # signature (error_problem, t, h, w, newton) -> w_next
    corrector_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "operators", tuple(self.operators))
        object.__setattr__(self, "initial_state", np.asarray(self.initial_state))
        if self.num_operators < 1:
            raise UsageError("a split problem needs at least one operator")
        t0, t1 = self.t_span
        if not t1 > t0:
            raise UsageError(f"time span must have positive length, got {self.t_span}")
        if self.jacobians is not None:
            object.__setattr__(self, "jacobians", tuple(self.jacobians))
            if len(self.jacobians) != self.num_operators:
                raise UsageError("need one jacobian entry (or None) per operator")

    @property
    def num_operators(self):
        return len(self.operators)

    def f_total(self, t, u):
        """Sum of all operator evaluations (or the user-supplied total)."""
        if self.rhs_total is not None:
            return np.asarray(self.rhs_total(t, u))
        total = np.asarray(self.operators[0](t, u)).copy()
        for op in self.operators[1:]:
            total = total + op(t, u)
        return total

    def jacobian_for(self, index):
        """Jacobian evaluator for a 0-based operator index, or None."""
        if self.jacobians is not None and self.jacobians[index] is not None:
            return self.jacobians[index]
        return getattr(self.operators[index], "jacobian", None)


def eval_split_rhs(problem, nu, t, u):
    """Evaluate operator f_nu.  nu is 1-based, matching the f_1..f_L naming.

    Raises UsageError for an out-of-range index and EvaluationError if the
    operator returns non-finite values.
    """
    if not 1 <= nu <= problem.num_operators:
        raise UsageError(
            f"operator index {nu} out of range 1..{problem.num_operators}")
    u = np.asarray(u)
    if u.shape != problem.initial_state.shape:
        raise UsageError(
            f"state shape {u.shape} does not match problem shape "
            f"{problem.initial_state.shape}")
    out = np.asarray(problem.operators[nu - 1](t, u))
    if not np.isfinite(out).all():
        raise EvaluationError(
            f"operator {nu} returned non-finite values at t={t}",
            operator_index=nu, time=t)
    return out


@dataclass(frozen=True)
class Trajectory:
    """Discrete solution: states at strictly increasing node times."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times)
        if not np.issubdtype(times.dtype, np.floating):
            times = times.astype(float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", np.asarray(self.states))
        if self.times.ndim != 1 or len(self.states) != len(self.times):
            raise UsageError("need exactly one state per node time")
        if not (np.diff(self.times) > 0).all():
            raise UsageError("node times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    @property
    def final_state(self):
        return self.states[-1]


class DiagonalLinearOperator:
    """f(t, u) = lam * u with scalar or elementwise (possibly complex) lam.

    The implicit solve is direct division; a vanishing factor 1 - alpha*lam
    is reported as a pole rather than ground through Newton.
    """

    def __init__(self, lam):
        self.lam = lam if np.isscalar(lam) else np.asarray(lam)

    def __call__(self, t, u):
        return self.lam * u

    def jacobian(self, t, u):
        flat = np.ravel(np.asarray(u))
        lam = np.broadcast_to(self.lam, np.shape(u)) if not np.isscalar(self.lam) else self.lam
        return np.diag(np.broadcast_to(lam, flat.shape).ravel()) if not np.isscalar(self.lam) \
            else np.eye(flat.size, dtype=np.result_type(self.lam, flat.dtype)) * self.lam

    def solve_implicit(self, t, alpha, rhs, guess=None, newton=None):
        factor = 1.0 - alpha * self.lam
        bad = np.abs(factor) < 1e-300
        if np.any(bad):
            raise PoleError(f"implicit factor vanished: 1 - alpha*lam = 0 at alpha={alpha}")
        return rhs / factor


class ZeroOperator:
    """The identically-zero operator; implicit solves are the identity."""

    def __call__(self, t, u):
        return np.zeros_like(u)

    def jacobian(self, t, u):
        n = np.asarray(u).size
        return np.zeros((n, n))

    def solve_implicit(self, t, alpha, rhs, guess=None, newton=None):
        return np.array(rhs, copy=True)


class MatrixLinearOperator:
    """f(t, u) = A @ u for a fixed dense matrix; solves by direct factorization."""

    def __init__(self, A):
        self.A = np.asarray(A)

    def __call__(self, t, u):
        return self.A @ u

    def jacobian(self, t, u):
        return self.A

    def solve_implicit(self, t, alpha, rhs, guess=None, newton=None):
        n = self.A.shape[0]
        M = np.eye(n, dtype=np.result_type(self.A.dtype, np.asarray(rhs).dtype)) - alpha * self.A
        return np.linalg.solve(M, rhs)
