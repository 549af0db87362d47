"""Lagrange interpolation, quadrature and differentiation on uniform nodes.

Everything here works on M+1 equispaced nodes t_m = t0 + m*h.  Weights are
generated in exact rational arithmetic and stored as floats, which keeps the
matrices reproducible and exact on polynomials up to degree M.  Uniform-node
interpolation degrades quickly beyond moderate M (Runge phenomenon), so M is
capped at MAX_SUBINTERVALS.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
import math
import warnings

import numpy as np

from .errors import UsageError

MAX_SUBINTERVALS = 16


@dataclass(frozen=True)
class UniformNodeSet:
    """M+1 uniformly spaced nodes t0, t0+h, ..., t0+M*h."""

    t0: float
    h: float
    M: int

    def __post_init__(self):
        if self.M < 1:
            raise UsageError(f"need at least one sub-interval, got M={self.M}")
        if self.M > MAX_SUBINTERVALS:
            raise UsageError(
                f"M={self.M} exceeds the uniform-node cap {MAX_SUBINTERVALS}; "
                "interpolation on more equispaced nodes is not trustworthy")
        if not self.h > 0:
            raise UsageError(f"sub-step size must be positive, got h={self.h}")

    @property
    def times(self):
        return self.t0 + self.h * np.arange(self.M + 1)

    @property
    def t_end(self):
        return self.t0 + self.M * self.h

    def local(self, t):
        """Map a time to the unit-spacing coordinate tau = (t - t0)/h."""
        return (t - self.t0) / self.h


@dataclass(frozen=True)
class IntegrationMatrix:
    """Weights gamma with  integral_{t0}^{t_{m+1}} p = (t_{m+1}-t0) * sum_j gamma[m,j] p(t_j)

    for every polynomial p of degree <= M.  Row m has M+1 entries; each row
    sums to one (exactness on constants).  The weights depend only on M.
    """

    M: int
    gamma: np.ndarray


@dataclass(frozen=True)
class DifferentiationMatrix:
    """D[m,n] = s-th derivative of the n-th cardinal function at node m."""

    M: int
    order: int
    D: np.ndarray


def _cardinal_coefficients(M):
    """Exact coefficients (ascending powers) of the Lagrange cardinals on 0..M."""
    cards = []
    for j in range(M + 1):
        coeffs = [Fraction(1)]
        denom = Fraction(1)
        for n in range(M + 1):
            if n == j:
                continue
            # multiply by (tau - n)
            coeffs = [Fraction(0)] + coeffs
            for k in range(len(coeffs) - 1):
                coeffs[k] -= n * coeffs[k + 1]
            denom *= Fraction(j - n)
        cards.append([c / denom for c in coeffs])
    return cards


def _poly_eval(coeffs, x):
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _poly_antiderivative(coeffs):
    return [Fraction(0)] + [c / (k + 1) for k, c in enumerate(coeffs)]


def _poly_derivative(coeffs):
    return [c * k for k, c in enumerate(coeffs)][1:]


@lru_cache(maxsize=None)
def _gamma_table(M):
    cards = _cardinal_coefficients(M)
    anti = [_poly_antiderivative(c) for c in cards]
    gamma = np.empty((M, M + 1))
    for m in range(M):
        for j in range(M + 1):
            gamma[m, j] = float(_poly_eval(anti[j], Fraction(m + 1)) / (m + 1))
    gamma.setflags(write=False)
    return gamma


@lru_cache(maxsize=None)
def _derivative_table(M, s):
    cards = _cardinal_coefficients(M)
    for _ in range(s):
        cards = [_poly_derivative(c) for c in cards]
    D = np.empty((M + 1, M + 1))
    for m in range(M + 1):
        for n in range(M + 1):
            D[m, n] = float(_poly_eval(cards[n], Fraction(m)))
    D.setflags(write=False)
    return D


@lru_cache(maxsize=None)
def _barycentric_weights(M):
    # Uniform-node barycentric weights (-1)^j * binomial(M, j); the common
    # scale cancels in the barycentric ratio.
    w = np.array([(-1.0) ** j * math.comb(M, j) for j in range(M + 1)])
    w.setflags(write=False)
    return w


@lru_cache(maxsize=None)
def _gauss_rule(M):
    # Enough Gauss points to integrate a degree-M interpolant exactly.
    npts = M // 2 + 1
    x, w = np.polynomial.legendre.leggauss(npts)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _stack_values(nodes, values):
    vals = np.stack([np.asarray(v) for v in values])
    if vals.shape[0] != nodes.M + 1:
        raise UsageError(
            f"expected {nodes.M + 1} node values, got {vals.shape[0]}")
    return vals


def _cardinal_row(M, tau):
    """Values of all cardinal functions at local coordinate tau (stable form)."""
    w = _barycentric_weights(M)
    dist = tau - np.arange(M + 1.0)
    on_node = np.abs(dist) < 1e-14 * max(1.0, abs(tau))
    row = np.zeros(M + 1)
    if on_node.any():
        row[np.argmax(on_node)] = 1.0
        return row
    q = w / dist
    return q / q.sum()


def lagrange_eval(nodes, values, t):
    """Evaluate the degree-M interpolant of the node values at time t.

    t may lie up to one sub-step outside the node range; that mild
    extrapolation is allowed but flagged with a warning.
    """
    vals = _stack_values(nodes, values)
    tau = nodes.local(t)
    if tau < -1.0 - 1e-12 or tau > nodes.M + 1.0 + 1e-12:
        raise UsageError(
            f"t={t} is more than one sub-step outside [{nodes.t0}, {nodes.t_end}]")
    if tau < -1e-12 or tau > nodes.M + 1e-12:
        warnings.warn(f"extrapolating interpolant to t={t}", stacklevel=2)
    row = _cardinal_row(nodes.M, tau)
    return np.tensordot(row, vals, axes=(0, 0))


def integration_matrix(nodes):
    """Quadrature weights for integrals from t0 to each interior/right node.

    The weights are affine invariant: they depend on M only, never on t0 or h.
    """
    return IntegrationMatrix(M=nodes.M, gamma=_gamma_table(nodes.M))


def partial_integral(nodes, values, t_upper):
    """Exact integral of the degree-M interpolant from t0 to t_upper.

    Evaluated by Gauss quadrature of the barycentric interpolant, which is
    exact for polynomials of degree <= M and numerically stable for all
    admissible M.
    """
    vals = _stack_values(nodes, values)
    tau_up = nodes.local(t_upper)
    if tau_up < -1e-12 or tau_up > nodes.M + 1e-12:
        raise UsageError(
            f"t_upper={t_upper} outside the macro interval [{nodes.t0}, {nodes.t_end}]")
    tau_up = min(max(tau_up, 0.0), float(nodes.M))
    if tau_up == 0.0:
        return np.zeros_like(vals[0])
    gx, gw = _gauss_rule(nodes.M)
    # map [-1, 1] -> [0, tau_up]
    taus = 0.5 * tau_up * (gx + 1.0)
    rows = np.stack([_cardinal_row(nodes.M, tau) for tau in taus])
    weights = (0.5 * tau_up * nodes.h) * (gw @ rows)
    return np.tensordot(weights, vals, axes=(0, 0))


@lru_cache(maxsize=None)
def _derivative_coefficients(M):
    coeffs = np.zeros((M + 1, M + 1))
    for j, card in enumerate(_cardinal_coefficients(M)):
        der = _poly_derivative(card)
        coeffs[j, :len(der)] = [float(c) for c in der]
    coeffs.setflags(write=False)
    return coeffs


def lagrange_derivative_eval(nodes, values, t):
    """First derivative of the degree-M interpolant at time t."""
    vals = _stack_values(nodes, values)
    tau = nodes.local(t)
    if tau < -1e-12 or tau > nodes.M + 1e-12:
        raise UsageError(f"t={t} outside the node range [{nodes.t0}, {nodes.t_end}]")
    coeffs = _derivative_coefficients(nodes.M)
    powers = tau ** np.arange(nodes.M + 1)
    row = (coeffs @ powers) / nodes.h
    return np.tensordot(row, vals, axes=(0, 0))


def differentiation_matrix(nodes, s):
    """Matrix mapping node values to s-th derivatives of their interpolant."""
    if not 1 <= s <= nodes.M:
        raise UsageError(f"derivative order s={s} must satisfy 1 <= s <= M={nodes.M}")
    D = _derivative_table(nodes.M, s) / nodes.h**s
    return DifferentiationMatrix(M=nodes.M, order=s, D=D)


def sobolev_norm(nodes, values, S):
    """Discrete Sobolev norm: sum over s=0..S of the max norm of D_s applied to the data.

    The s=0 term is the plain max norm of the data itself.
    """
    if not 0 <= S <= nodes.M:
        raise UsageError(f"smoothness degree S={S} must satisfy 0 <= S <= M={nodes.M}")
    vals = _stack_values(nodes, values)
    flat = vals.reshape(nodes.M + 1, -1)
    total = np.abs(flat).max()
    for s in range(1, S + 1):
        D = differentiation_matrix(nodes, s).D
        total += np.abs(D @ flat).max()
    return float(total)
