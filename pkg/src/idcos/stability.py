"""Linear stability analysis of the deferred-correction splitting schemes.

The test problem is u' = lambda*u with u(0) = 1, split equally over two
operators (lambda/2 each), integrated over a single macro step of length one.
The magnitude of u(1) as a function of complex lambda is the amplification
field; its unit level set bounds the stability region.

The scalar problem is solved with direct division rather than Newton, so a
whole grid of lambda values can be scanned in one vectorized run.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import PoleError, UsageError
from .idc import IDCConfig, idc_solve
from .ode import SplitIVP
from .steppers import NewtonConfig

DEFAULT_RESIDUAL_MODE = "oversampled(13)"


class _HalfLambdaOperator:
    """f(t, u) = (lam/2) * u, elementwise over a grid of lambda values.

    In lenient mode a vanishing implicit factor produces inf in that cell
    instead of aborting the scan; cells never couple, so poles stay local.
    """

    def __init__(self, lam, strict=True):
        self.half_lam = 0.5 * np.asarray(lam)
        self.strict = strict

    def __call__(self, t, u):
        return self.half_lam * u

    def solve_implicit(self, t, alpha, rhs, guess=None, newton=None):
        factor = 1.0 - alpha * self.half_lam
        if self.strict and np.any(np.abs(factor) < 1e-300):
            raise PoleError(
                f"implicit factor 1 - alpha*lambda/2 vanished at alpha={alpha}")
        with np.errstate(divide="ignore", invalid="ignore"):
            return rhs / factor


def _dahlquist_problem(lam, strict=True):
    lam = np.asarray(lam, dtype=complex)
    op = _HalfLambdaOperator(lam, strict=strict)
    return SplitIVP(operators=(op, op),
                    initial_state=np.ones_like(lam),
                    t_span=(0.0, 1.0))


def _config(scheme, corrections, M, residual_mode):
    return IDCConfig(corrections=corrections, predictor=scheme, M=M,
                     residual_mode=residual_mode,
                     newton=NewtonConfig())


def amplification(lam, scheme, corrections, M=None, residual_mode=DEFAULT_RESIDUAL_MODE):
    """u(1) after one macro step on the split test problem u' = lambda*u.

    Raises PoleError when an implicit stage factor is singular.
    """
    problem = _dahlquist_problem(np.asarray([lam], dtype=complex), strict=True)
    cfg = _config(scheme, corrections, M, residual_mode)
    traj = idc_solve(problem, 1, cfg, keep="final")
    return complex(traj.final_state[0])


def amplification_field(lams, scheme, corrections, M=None,
                        residual_mode=DEFAULT_RESIDUAL_MODE):
    """Vectorized |amplification| over an array of lambda values.

    Pole cells come back as inf.
    """
    problem = _dahlquist_problem(lams, strict=False)
    cfg = _config(scheme, corrections, M, residual_mode)
    traj = idc_solve(problem, 1, cfg, keep="final")
    amp = np.abs(traj.final_state)
    amp[~np.isfinite(amp)] = np.inf
    return amp


@dataclass(frozen=True)
class StabilityScan:
    """A rectangular scan of the complex plane for one scheme configuration."""

    scheme: str
    corrections: int
    re_range: tuple = (-20.0, 4.0)
    im_range: tuple = (-12.0, 12.0)
    resolution: tuple = (601, 601)
    M: int = None
    residual_mode: str = DEFAULT_RESIDUAL_MODE
    amp: np.ndarray = None
    contours: tuple = None

    def axes(self):
        n_re, n_im = self.resolution
        if n_re < 2 or n_im < 2:
            raise UsageError("scan needs at least two samples per axis")
        return (np.linspace(*self.re_range, n_re),
                np.linspace(*self.im_range, n_im))


def scan_region(spec):
    """Fill the scan's amplification field and extract its |amp| = 1 contours."""
    re, im = spec.axes()
    lam = re[:, None] + 1j * im[None, :]
    amp = amplification_field(lam, spec.scheme, spec.corrections,
                              M=spec.M, residual_mode=spec.residual_mode)
    contours = marching_squares(re, im, amp, 1.0)
    return replace(spec, amp=amp, contours=tuple(contours))


def marching_squares(xs, ys, field, level):
    """Level-set polylines of a scalar field on a rectangular grid.

    Returns a list of polylines, each an (n, 2) array of (x, y) points.
    Crossings are linearly interpolated along cell edges; saddle cells are
    disambiguated by the cell-center average.  Cells touching non-finite
    values are skipped (reported as gaps, not failures).
    """
    F = np.asarray(field) - level
    nx, ny = F.shape
    segments = []

    def interp(xa, ya, fa, xb, yb, fb):
        t = fa / (fa - fb)
        return (xa + t * (xb - xa), ya + t * (yb - ya))

    for i in range(nx - 1):
        for j in range(ny - 1):
            f = (F[i, j], F[i + 1, j], F[i + 1, j + 1], F[i, j + 1])
            if not all(np.isfinite(v) for v in f):
                continue
            idx = sum(1 << k for k, v in enumerate(f) if v > 0)
            if idx in (0, 15):
                continue
            x0, x1 = xs[i], xs[i + 1]
            y0, y1 = ys[j], ys[j + 1]
            corners = ((x0, y0, f[0]), (x1, y0, f[1]), (x1, y1, f[2]), (x0, y1, f[3]))
            edges = {}
            for k in range(4):
                a, b = corners[k], corners[(k + 1) % 4]
                if (a[2] > 0) != (b[2] > 0):
                    edges[k] = interp(*a, *b)
            keys = sorted(edges)
            if len(keys) == 2:
                segments.append((edges[keys[0]], edges[keys[1]]))
            elif len(keys) == 4:
                center_positive = sum(v for _, _, v in corners) > 0
                first_positive = f[0] > 0
                if center_positive == first_positive:
                    segments.append((edges[0], edges[3]))
                    segments.append((edges[1], edges[2]))
                else:
                    segments.append((edges[0], edges[1]))
                    segments.append((edges[2], edges[3]))
    return _stitch_segments(segments)


def _stitch_segments(segments):
    """Chain raw cell segments into polylines by matching endpoints."""
    def key(p):
        return (round(p[0], 12), round(p[1], 12))

    adjacency = {}
    for s, (a, b) in enumerate(segments):
        adjacency.setdefault(key(a), []).append((s, 0))
        adjacency.setdefault(key(b), []).append((s, 1))

    used = [False] * len(segments)
    polylines = []
    for start in range(len(segments)):
        if used[start]:
            continue
        used[start] = True
        a, b = segments[start]
        chain = [a, b]
        for end_idx in (1, 0):
            while True:
                k = key(chain[-1] if end_idx == 1 else chain[0])
                candidates = [(s, e) for s, e in adjacency.get(k, []) if not used[s]]
                if not candidates:
                    break
                s, e = candidates[0]
                used[s] = True
                nxt = segments[s][1 - e]
                if end_idx == 1:
                    chain.append(nxt)
                else:
                    chain.insert(0, nxt)
        polylines.append(np.asarray(chain))
    return polylines


def stability_boundary_real_axis(scheme, corrections, M=None,
                                 residual_mode=DEFAULT_RESIDUAL_MODE,
                                 max_magnitude=2.0**24, tol=1e-6):
    """Crossing of |amp| = 1 on the negative real axis, or None if stable throughout.

    Walks a geometric ladder of magnitudes until the scheme goes unstable,
    then bisects the bracket.  Returns the (negative) crossing location.
    """
    def stable(lam):
        try:
            amp = abs(amplification(lam, scheme, corrections, M=M,
                                    residual_mode=residual_mode))
        except PoleError:
            return False
        return amp <= 1.0

    lo = -1e-3  # stable end (near the origin every scheme is stable)
    hi = None
    mag = 0.5
    while mag <= max_magnitude:
        if not stable(-mag):
            hi = -mag
            break
        lo = -mag
        mag *= 2.0
    if hi is None:
        return None
    while abs(hi - lo) > tol * max(1.0, abs(lo)):
        mid = 0.5 * (lo + hi)
        if stable(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def write_field_csv(path, scan):
    """Field CSV: header re,im,abs_amp; one row per grid point, im outer."""
    re, im = scan.axes()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("re,im,abs_amp\n")
        for j, y in enumerate(im):
            for i, x in enumerate(re):
                fh.write(f"{x!r},{y!r},{scan.amp[i, j]!r}\n")


def write_contour_csv(path, scan):
    """Contour CSV: polyline points tagged with their segment id."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("re,im,segment_id\n")
        for seg_id, line in enumerate(scan.contours or ()):
            for x, y in line:
                fh.write(f"{x!r},{y!r},{seg_id}\n")
