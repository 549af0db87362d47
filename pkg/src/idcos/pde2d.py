"""Method-of-lines reduction of 2D parabolic problems to split IVPs.

The PDE  u_t = div(a(x,y) grad u) + s(t,u)  is discretized on a tensor grid
in non-divergence form  a*u_xx + a_x*u_x + a*u_yy + a_y*u_y + s,  with the
coefficient derivatives supplied analytically.  The x-direction terms, the
y-direction terms and the pointwise source become the split operators; the
direction operators carry exact banded line Jacobians, so every implicit
sub-step reduces to independent line solves.

Fields are stored row-major with y as the outer index, shape (N_y, N_x);
multi-component states prepend the component axis.  x-direction line solves
run over contiguous rows, y-direction solves pay one transpose.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .banded import BandedMatrix
from .errors import NewtonError, UsageError
from .ode import SplitIVP
from .steppers import DEFAULT_NEWTON
from .stencils import build_stencil


@dataclass(frozen=True)
class Grid2D:
    """Tensor-product grid on a rectangle.

    Dirichlet grids hold N interior nodes per axis with the walls as known
    extended nodes; periodic grids hold N nodes covering one period.
    """

    x_span: tuple
    y_span: tuple
    N_x: int
    N_y: int
    bc: str = "dirichlet"

    def __post_init__(self):
        if self.bc not in ("dirichlet", "periodic"):
            raise UsageError(f"unknown boundary kind {self.bc!r}")
        if self.N_x < 1 or self.N_y < 1:
            raise UsageError("grid needs at least one node per axis")
        for lo, hi in (self.x_span, self.y_span):
            if not hi > lo:
                raise UsageError("grid spans must have positive length")

    @property
    def dx(self):
        lo, hi = self.x_span
        return (hi - lo) / (self.N_x + 1 if self.bc == "dirichlet" else self.N_x)

    @property
    def dy(self):
        lo, hi = self.y_span
        return (hi - lo) / (self.N_y + 1 if self.bc == "dirichlet" else self.N_y)

    @property
    def xs(self):
        lo = self.x_span[0]
        start = 1 if self.bc == "dirichlet" else 0
        return lo + self.dx * np.arange(start, start + self.N_x)

    @property
    def ys(self):
        lo = self.y_span[0]
        start = 1 if self.bc == "dirichlet" else 0
        return lo + self.dy * np.arange(start, start + self.N_y)

    @property
    def shape(self):
        return (self.N_y, self.N_x)

    def mesh(self):
        X, Y = np.meshgrid(self.xs, self.ys)
        return X, Y


@dataclass(frozen=True)
class CoefficientField:
    """Diffusion coefficient a(x,y) and its analytic partial derivatives."""

    a: np.ndarray
    a_x: np.ndarray
    a_y: np.ndarray

    def __post_init__(self):
        if not (np.asarray(self.a) > 0).all():
            raise UsageError("parabolicity requires a > 0 everywhere")

    @classmethod
    def from_callables(cls, grid, a, a_x=None, a_y=None):
        X, Y = grid.mesh()
        zero = np.zeros(grid.shape)
        return cls(a=np.broadcast_to(a(X, Y), grid.shape).copy(),
                   a_x=zero if a_x is None else np.broadcast_to(a_x(X, Y), grid.shape).copy(),
                   a_y=zero if a_y is None else np.broadcast_to(a_y(X, Y), grid.shape).copy())

    @classmethod
    def constant(cls, grid, value):
        full = np.full(grid.shape, float(value))
        zero = np.zeros(grid.shape)
        return cls(a=full, a_x=zero, a_y=zero)


class _SharedLineSolver:
    """All lines share one banded matrix (constant coefficients)."""

    def __init__(self, matrix):
        self.bm = BandedMatrix.from_sparse(matrix)

    def solve(self, lines):
        # lines: (n_lines, n) with each row one line system's rhs
        return self.bm.solve(lines.T).T


class _StackedLineSolver:
    """Per-line matrices stacked into one block-diagonal sparse LU."""

    def __init__(self, matrices):
        self.n_lines = len(matrices)
        self.n = matrices[0].shape[0]
        self.lu = splu(sp.block_diag(matrices, format="csc"))

    def solve(self, lines):
        return self.lu.solve(lines.reshape(-1)).reshape(self.n_lines, self.n)


class DirectionalDiffusionOperator:
    """One direction's diffusion terms:  a * (d2 u) + slope * (d1 u) + boundary.

    ``slope`` is the coefficient's own derivative along this axis (a_x for the
    x-direction).  Implicit solves (I - alpha*L) factor once per alpha and are
    reused; the boundary contribution is the only time-dependent piece.
    """

    def __init__(self, grid, axis, coeff, order=6, boundary=None):
        self.grid = grid
        self.axis = axis
        self.order = order
        self.boundary = boundary
        self.stencil2 = build_stencil(grid, axis, 2, order)
        if isinstance(coeff, CoefficientField):
            self.a = coeff.a
            self.slope = coeff.a_x if axis == "x" else coeff.a_y
        else:
            self.a = float(coeff)
            self.slope = 0.0
        self.has_slope = np.any(np.asarray(self.slope) != 0)
        self.stencil1 = build_stencil(grid, axis, 1, order) if self.has_slope else None
        self.constant = np.isscalar(self.a) or (np.ptp(self.a) == 0 and not self.has_slope)
        self._solvers = {}
        if grid.bc == "dirichlet" and boundary is None:
            raise UsageError("Dirichlet grids need a boundary function g(x, y, t)")

    # -- application ------------------------------------------------------

    def _apply_stencil(self, stencil, U):
        if self.axis == "x":
            return (stencil.matrix @ U.T).T
        return stencil.matrix @ U

    def apply_homogeneous(self, t, U):
        """The pure line operator L applied to a field, boundary terms dropped."""
        out = self.a * self._apply_stencil(self.stencil2, U)
        if self.has_slope:
            out = out + self.slope * self._apply_stencil(self.stencil1, U)
        return out

    def boundary_contribution(self, t):
        """Additive field carrying the known wall values at time t."""
        if self.grid.bc == "periodic":
            return np.zeros(self.grid.shape)
        g = self.boundary
        if self.axis == "x":
            lo, hi = self.grid.x_span
            gl = np.asarray(g(lo, self.grid.ys, t), dtype=float)
            gr = np.asarray(g(hi, self.grid.ys, t), dtype=float)
            gl = np.broadcast_to(gl, (self.grid.N_y,))
            gr = np.broadcast_to(gr, (self.grid.N_y,))
            contrib = self.a * (np.outer(gl, self.stencil2.wall_left)
                                + np.outer(gr, self.stencil2.wall_right))
            if self.has_slope:
                contrib = contrib + self.slope * (
                    np.outer(gl, self.stencil1.wall_left)
                    + np.outer(gr, self.stencil1.wall_right))
        else:
            lo, hi = self.grid.y_span
            gb = np.broadcast_to(np.asarray(g(self.grid.xs, lo, t), dtype=float),
                                 (self.grid.N_x,))
            gt = np.broadcast_to(np.asarray(g(self.grid.xs, hi, t), dtype=float),
                                 (self.grid.N_x,))
            contrib = self.a * (np.outer(self.stencil2.wall_left, gb)
                                + np.outer(self.stencil2.wall_right, gt))
            if self.has_slope:
                contrib = contrib + self.slope * (
                    np.outer(self.stencil1.wall_left, gb)
                    + np.outer(self.stencil1.wall_right, gt))
        return contrib

    def __call__(self, t, U):
        out = self.apply_homogeneous(t, U)
        if self.grid.bc == "dirichlet":
            out = out + self.boundary_contribution(t)
        return out

    # -- implicit solves ---------------------------------------------------

    def line_matrix(self, j):
        """Sparse line operator L_j for line index j (a y-row for axis x)."""
        n = self.stencil2.n
        if np.isscalar(self.a):
            mat = self.a * self.stencil2.matrix
            if self.has_slope:
                mat = mat + self.slope * self.stencil1.matrix
            return mat
        if self.axis == "x":
            a_line, s_line = self.a[j, :], np.asarray(self.slope)[j, :] if self.has_slope else None
        else:
            a_line = self.a[:, j]
            s_line = np.asarray(self.slope)[:, j] if self.has_slope else None
        mat = sp.diags(a_line) @ self.stencil2.matrix
        if self.has_slope:
            mat = mat + sp.diags(s_line) @ self.stencil1.matrix
        return mat

    def _solver(self, alpha):
        key = float(alpha)
        solver = self._solvers.get(key)
        if solver is None:
            n = self.stencil2.n
            eye = sp.eye(n, format="csr")
            if self.constant:
                solver = _SharedLineSolver(eye - alpha * self.line_matrix(0))
            else:
                n_lines = self.grid.N_y if self.axis == "x" else self.grid.N_x
                solver = _StackedLineSolver(
                    [sp.csc_matrix(eye - alpha * self.line_matrix(j))
                     for j in range(n_lines)])
            self._solvers[key] = solver
        return solver

    def solve_homogeneous(self, t, alpha, rhs, guess=None, newton=None):
        """Solve (I - alpha*L) X = rhs with no boundary terms."""
        solver = self._solver(alpha)
        if self.axis == "x":
            return solver.solve(rhs)
        return solver.solve(rhs.T).T

    def solve_implicit(self, t, alpha, rhs, guess=None, newton=None):
        """Solve X - alpha*f(t, X) = rhs including the boundary contribution."""
        if self.grid.bc == "dirichlet":
            rhs = rhs + alpha * self.boundary_contribution(t)
        return self.solve_homogeneous(t, alpha, rhs)


class ComponentWiseOperator:
    """Applies an independent directional operator to each state component.

    Components without diffusion carry None; their solve is the identity.
    """

    def __init__(self, ops):
        self.ops = tuple(ops)

    def __call__(self, t, U):
        return np.stack([np.zeros_like(U[c]) if op is None else op(t, U[c])
                         for c, op in enumerate(self.ops)])

    def apply_homogeneous(self, t, U):
        return np.stack([np.zeros_like(U[c]) if op is None
                         else op.apply_homogeneous(t, U[c])
                         for c, op in enumerate(self.ops)])

    def solve_homogeneous(self, t, alpha, rhs, guess=None, newton=None):
        return np.stack([rhs[c].copy() if op is None
                         else op.solve_homogeneous(t, alpha, rhs[c])
                         for c, op in enumerate(self.ops)])

    def solve_implicit(self, t, alpha, rhs, guess=None, newton=None):
        return np.stack([rhs[c].copy() if op is None
                         else op.solve_implicit(t, alpha, rhs[c])
                         for c, op in enumerate(self.ops)])


class PointwiseSourceOperator:
    """A source acting node-by-node, solved by vectorized per-node Newton.

    ``jacobian(t, U)`` returns ds/du per node: shape (N_y, N_x) for scalar
    states or (c, c, N_y, N_x) for c components.
    """

    def __init__(self, source, jacobian, components=1):
        self.source = source
        self.source_jacobian = jacobian
        self.components = components

    def __call__(self, t, U):
        return np.asarray(self.source(t, U))

    def solve_implicit(self, t, alpha, rhs, guess=None, newton=DEFAULT_NEWTON):
        x = np.array(rhs if guess is None else guess, copy=True, dtype=float)
        target = None
        for _ in range(newton.max_iters):
            r = x - alpha * np.asarray(self.source(t, x)) - rhs
            norm = float(np.max(np.abs(r)))
            if target is None:
                target = newton.abs_tol + newton.rel_tol * norm
            if norm <= target:
                return x
            J = np.asarray(self.source_jacobian(t, x))
            if self.components == 1:
                x = x - r / (1.0 - alpha * J)
            else:
                c = self.components
                A = -alpha * np.transpose(J, (2, 3, 0, 1)).copy()
                idx = np.arange(c)
                A[..., idx, idx] += 1.0
                b = np.moveaxis(r, 0, -1)[..., None]
                delta = np.linalg.solve(A, b)[..., 0]
                x = x - np.moveaxis(delta, -1, 0)
        worst = np.unravel_index(np.argmax(np.abs(r)), r.shape)
        raise NewtonError(
            f"pointwise Newton stalled at node {worst} (residual {norm:.3e})",
            iterations=newton.max_iters, residual_norm=norm, time=t)


def pointwise_reaction_solve(source, jacobian, t, dt, u, scheme="backward-euler",
                             components=1, newton=DEFAULT_NEWTON):
    """One implicit sub-step of u' = s(t, u) at every node independently."""
    op = PointwiseSourceOperator(source, jacobian, components=components)
    if scheme == "backward-euler":
        return op.solve_implicit(t + dt, dt, u, guess=u, newton=newton)
    if scheme == "trapezoid":
        rhs = u + 0.5 * dt * np.asarray(source(t, u))
        return op.solve_implicit(t + dt, 0.5 * dt, rhs, guess=u, newton=newton)
    raise UsageError(f"unknown pointwise scheme {scheme!r}")


class SemiDiscreteSystem:
    """A 2D parabolic problem reduced to a split IVP.

    f_1 holds the x-direction terms, f_2 the y-direction terms and f_3 the
    pointwise source (when present).  Scalar problems take a CoefficientField;
    multi-component systems take one constant diffusion coefficient per
    component (zero or None disables diffusion for that component).
    """

    def __init__(self, grid, coefficients, order=6, boundary=None,
                 source=None, source_jacobian=None, components=1):
        self.grid = grid
        self.order = order
        self.components = components
        self.boundary = boundary
        if components == 1:
            if not isinstance(coefficients, CoefficientField):
                coefficients = CoefficientField.constant(grid, coefficients)
            self.coefficients = coefficients
            self.op_x = DirectionalDiffusionOperator(grid, "x", coefficients,
                                                     order=order, boundary=boundary)
            self.op_y = DirectionalDiffusionOperator(grid, "y", coefficients,
                                                     order=order, boundary=boundary)
        else:
            if isinstance(coefficients, CoefficientField) or np.isscalar(coefficients):
                raise UsageError("multi-component systems need one coefficient per component")
            ops_x, ops_y = [], []
            for D in coefficients:
                if D is None or (np.isscalar(D) and D == 0):
                    ops_x.append(None)
                    ops_y.append(None)
                else:
                    ops_x.append(DirectionalDiffusionOperator(
                        grid, "x", D, order=order, boundary=boundary))
                    ops_y.append(DirectionalDiffusionOperator(
                        grid, "y", D, order=order, boundary=boundary))
            self.coefficients = tuple(coefficients)
            self.op_x = ComponentWiseOperator(ops_x)
            self.op_y = ComponentWiseOperator(ops_y)
        self.op_source = None
        if source is not None:
            if source_jacobian is None:
                raise UsageError("a pointwise source needs its jacobian for Newton")
            self.op_source = PointwiseSourceOperator(source, source_jacobian,
                                                     components=components)

    @property
    def state_shape(self):
        return self.grid.shape if self.components == 1 else (self.components,) + self.grid.shape

    def operators(self):
        ops = [self.op_x, self.op_y]
        if self.op_source is not None:
            ops.append(self.op_source)
        return tuple(ops)

    def split_ivp(self, initial_field, t_span):
        """Expose the semi-discrete system as a split IVP.

        Linear scalar problems register the factored alternating-direction
        sweep as the prediction-time 'adi' stepper: its boundary terms use
        only whole-step times, so no half-step boundary error enters.
        """
        initial_field = np.asarray(initial_field, dtype=float)
        if initial_field.shape != self.state_shape:
            raise UsageError(
                f"initial field shape {initial_field.shape} does not match "
                f"{self.state_shape}")
        overrides = {}
        corrector_overrides = {"strang": self._stage_safe_strang_correction}
        if self.op_source is None and self.components == 1:
            overrides["adi"] = lambda problem, t, dt, u, newton=None: \
                adi_pde_step(self, t, dt, u)
            corrector_overrides["adi"] = self._factored_adi_correction
        return SplitIVP(operators=self.operators(), initial_state=initial_field,
                        t_span=t_span, predictor_overrides=overrides,
                        corrector_overrides=corrector_overrides)

    def _stage_safe_strang_correction(self, ep, t, h, w, newton):
        """Palindromic correction sub-step evaluating the residual integral
        at node values only.

        The half-stage value of the residual integral is taken as the average
        of the adjacent node values instead of the interpolant: stiff modes
        oscillate from node to node after an implicit-trapezoid prediction,
        and interpolating them to mid-cell amplifies the oscillation by the
        binomial growth of the cardinal functions.  The averaging keeps the
        corrector's order while restoring its practical stability on
        semi-discrete diffusion.
        """
        th, t1 = t + 0.5 * h, t + h
        I_m = ep.shift(t)
        I_p = ep.shift(t1)
        I_h = 0.5 * (I_m + I_p)

        def trap(op, I_a, I_b, ta, tb, w):
            beta = 0.5 * (tb - ta)
            rhs = w + beta * op.apply_homogeneous(ta, w - I_a - I_b)
            return op.solve_homogeneous(tb, beta, rhs)

        w = trap(self.op_x, I_m, I_h, t, th, w)
        w = trap(self.op_y, I_h, I_p, th, t1, w)
        if self.op_source is not None:
            # middle full-cell trapezoid runs node-to-node; the generic wrapped
            # operator only touches node values here
            op3 = ep.ivp.operators[2]
            half = 0.5 * h
            rhs = w + half * np.asarray(op3(t, w))
            w = op3.solve_implicit(t1, half, rhs, guess=w, newton=newton)
        w = trap(self.op_y, I_m, I_h, t, th, w)
        w = trap(self.op_x, I_h, I_p, th, t1, w)
        return w

    def _factored_adi_correction(self, ep, t, h, w, newton):
        """Factored node-value sweep for the linear error equation.

        The Crank-Nicolson update of Q' = L(Q - Int(t)) factors into two
        half-step line sweeps once the residual term
        R = -(J1+J2)(Int_m + Int_{m+1}) is split equally between them; the
        equal split makes the pair algebraically identical to the factored
        one-step scheme.  Only node values of the residual integral enter,
        which keeps stiff modes from amplifying off-node interpolation error.
        """
        opx, opy = self.op_x, self.op_y
        half = 0.5 * h
        I_sum = ep.shift(t) + ep.shift(t + h)
        R = -half * (opx.apply_homogeneous(t, I_sum)
                     + opy.apply_homogeneous(t, I_sum))
        mid = opx.solve_homogeneous(t, half,
                                    w + half * opy.apply_homogeneous(t, w) + 0.5 * R)
        return opy.solve_homogeneous(t, half,
                                     mid + half * opx.apply_homogeneous(t, mid) + 0.5 * R)


def adi_pde_step(system, t, dt, field):
    """Factored alternating-direction sweep for the linear scalar problem.

    x-sweep: (I - J1) U_mid = (I + J2) U + S1,
    y-sweep: (I - J2) U_new = (I + J1) U_mid + S2,
    with the boundary terms S evaluated at the step endpoints only, so the
    half-step intermediate never touches the boundary data.
    """
    if system.op_source is not None or system.components != 1:
        raise UsageError("the factored sweep applies to linear scalar problems")
    opx, opy = system.op_x, system.op_y
    half = 0.5 * dt
    dirichlet = system.grid.bc == "dirichlet"
    rhs1 = field + half * opy.apply_homogeneous(t, field)
    if dirichlet:
        rhs1 = rhs1 + half * (opx.boundary_contribution(t + dt)
                              + opy.boundary_contribution(t))
    mid = opx.solve_homogeneous(t, half, rhs1)
    rhs2 = mid + half * opx.apply_homogeneous(t, mid)
    if dirichlet:
        rhs2 = rhs2 + half * (opx.boundary_contribution(t)
                              + opy.boundary_contribution(t + dt))
    return opy.solve_homogeneous(t, half, rhs2)


@dataclass(frozen=True)
class HalfStepLineOperator:
    """J = (dt/2) * L for one direction, exposed per line and as field action."""

    op: object
    dt: float

    def apply(self, U):
        return 0.5 * self.dt * self.op.apply_homogeneous(0.0, U)

    def line_matrix(self, j):
        return 0.5 * self.dt * self.op.line_matrix(j)

    def solve(self, rhs):
        """Solve (I - J) X = rhs."""
        return self.op.solve_homogeneous(0.0, 0.5 * self.dt, rhs)


def assemble_J(system, dt):
    """The two half-step banded line operators of the factored sweep."""
    if system.components != 1:
        raise UsageError("line operators are defined for scalar problems")
    return (HalfStepLineOperator(system.op_x, dt),
            HalfStepLineOperator(system.op_y, dt))


class _HomogeneousVariant:
    """A directional operator with its boundary contribution zeroed."""

    def __init__(self, op):
        self._op = op

    def __call__(self, t, U):
        return self._op.apply_homogeneous(t, U)

    def apply_homogeneous(self, t, U):
        return self._op.apply_homogeneous(t, U)

    def boundary_contribution(self, t):
        return np.zeros(self._op.grid.shape)

    def solve_implicit(self, t, alpha, rhs, guess=None, newton=None):
        return self._op.solve_homogeneous(t, alpha, rhs)

    solve_homogeneous = solve_implicit


def error_problem_bc(system):
    """Operators as seen by correction sweeps: Dirichlet walls become zero.

    The error equation's operators are differences of identical affine maps,
    so the known-boundary terms cancel; periodic operators are unchanged.
    """
    out = []
    for op in system.operators():
        if isinstance(op, DirectionalDiffusionOperator) and op.grid.bc == "dirichlet":
            out.append(_HomogeneousVariant(op))
        elif isinstance(op, ComponentWiseOperator) and system.grid.bc == "dirichlet":
            out.append(ComponentWiseOperator(
                [None if sub is None else _HomogeneousVariant(sub) for sub in op.ops]))
        else:
            out.append(op)
    return tuple(out)


def write_field_snapshot(path, grid, field, names=("u",)):
    """Snapshot CSV: x,y,u[,v] rows, row-major with y as the outer loop."""
    field = np.asarray(field)
    if field.ndim == 2:
        field = field[None, :, :]
    xs, ys = grid.xs, grid.ys
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,y," + ",".join(names[:field.shape[0]]) + "\n")
        for j, y in enumerate(ys):
            for i, x in enumerate(xs):
                vals = ",".join(repr(float(field[c, j, i])) for c in range(field.shape[0]))
                fh.write(f"{x!r},{y!r},{vals}\n")
