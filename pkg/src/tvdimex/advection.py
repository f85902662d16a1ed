"""Scalar two-speed advection on a periodic grid.

The model is ``w_t + c_m w_x + (c_a/eps) w_x = 0``; the slow transport is
explicit and the fast one implicit.  Only positive speeds are supported.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .mood import MoodHierarchy, integrate, run as mood_run
from .stepper import SemiDiscreteProblem, TimeScheme, cfl_dt
from .tableaux import (TVD3_4_LAMBDA, TVD3_4_THETA, TVD3_LAMBDA, TVD3_THETA,
                       builtin)

__all__ = [
    "ScalarProblemSpec",
    "upwind_op",
    "central_op",
    "reconstruct3",
    "limited_op",
    "unlimited_op",
    "implicit_solve_upwind",
    "implicit_solve_central",
    "exact_smooth",
    "exact_discontinuous",
    "make_problem",
    "SCALAR_SCHEMES",
    "scalar_scheme",
    "simulate",
    "total_variation",
]


@dataclass(frozen=True)
class ScalarProblemSpec:
    """Parameters of the scalar problem.

    Parameters
    ----------
    c_m, c_a : float
        Slow speed and fast-scale coefficient (fast speed is ``c_a/eps``).
    eps : float
    N : int
        Number of cells on ``(0, length)``.
    length : float, optional
        Defaults to ``c_m + c_a/eps``, one period of the bump solution.
    """

    c_m: float = 1.0
    c_a: float = 1.0
    eps: float = 1.0
    N: int = 20
    length: float = None

    def __post_init__(self):
        if self.c_m <= 0 or self.c_a <= 0 or self.eps <= 0:
            raise ValueError("c_m, c_a and eps must be positive")
        if self.N < 3:
            raise ValueError("need at least 3 cells")
        if self.length is None:
            object.__setattr__(self, "length", self.c_m + self.c_a / self.eps)

    @classmethod
    def from_dx(cls, dx, c_m=1.0, c_a=1.0, eps=1.0, length=None):
        L = c_m + c_a / eps if length is None else length
        return cls(c_m, c_a, eps, int(round(L / dx)), L)

    @property
    def dx(self) -> float:
        return self.length / self.N

    @property
    def fast_speed(self) -> float:
        return self.c_a / self.eps

    @property
    def x(self) -> np.ndarray:
        """Cell centres."""
        return (np.arange(self.N) + 0.5) * self.dx


# ---------------------------------------------------------------------------
# space operators

def upwind_op(w, speed, dx):
    """First-order upwind tendency ``-speed*(w_j - w_{j-1})/dx``."""
    return -speed * (w - np.roll(w, 1)) / dx


def central_op(w, speed, dx):
    """Central tendency ``-speed*(w_{j+1} - w_{j-1})/(2dx)``."""
    return -speed * (np.roll(w, -1) - np.roll(w, 1)) / (2.0 * dx)


def _koren_half_slope(a, b):
    """``b*phi(a/b)/2`` for the third-order TVD limiter, division free.

    ``phi(r) = max(0, min(2r, (2+r)/3, 2))`` coincides with the unlimited
    third-order value for ``0.4 <= r <= 4``.
    """
    same = a * b > 0.0
    mag = np.minimum(np.minimum(2.0 * np.abs(a), np.abs(2.0 * b + a) / 3.0), 2.0 * np.abs(b))
    return np.where(same, 0.5 * np.sign(b) * mag, 0.0)


def reconstruct3(w, limited=True):
    """Interface values ``(w_minus, w_plus)`` of every cell.

    ``w_plus[j]`` sits at ``x_{j+1/2}`` and ``w_minus[j]`` at ``x_{j-1/2}``.
    The unlimited values come from the parabola through three cell averages;
    the limited ones switch to the third-order TVD limiter near non-smooth
    extrema and respect the three-point bound.
    """
    d_left = w - np.roll(w, 1)     # w_j - w_{j-1}
    d_right = np.roll(w, -1) - w   # w_{j+1} - w_j
    if limited:
        w_plus = w + _koren_half_slope(d_left, d_right)
        w_minus = w - _koren_half_slope(d_right, d_left)
    else:
        w_plus = w + (2.0 * d_right + d_left) / 6.0
        w_minus = w - (2.0 * d_left + d_right) / 6.0
    return w_minus, w_plus


def _recon_op(w, speed, dx, limited):
    _, wp = reconstruct3(w, limited)
    return -speed * (wp - np.roll(wp, 1)) / dx


def limited_op(w, speed, dx):
    """Upwind flux difference with limited third-order interface values."""
    return _recon_op(w, speed, dx, True)


def unlimited_op(w, speed, dx):
    """Upwind flux difference with unlimited third-order interface values."""
    return _recon_op(w, speed, dx, False)


def implicit_solve_upwind(nu, rhs):
    """Solve ``x_j + nu*(x_j - x_{j-1}) = rhs_j`` on a periodic grid.

    A first-order recursive filter does the forward sweep and the cyclic
    coupling is restored with a closed-form correction.
    """
    if nu < 0:
        raise ValueError("nu must be non-negative")
    rhs = np.asarray(rhs, dtype=float)
    if nu == 0.0:
        return rhs.copy()
    N = rhs.size
    q = nu / (1.0 + nu)
    p = lfilter([1.0 / (1.0 + nu)], [1.0, -q], rhs)
    qpow = q ** np.arange(1, N + 1)
    x_last = p[-1] / (1.0 - qpow[-1])
    return p + x_last * qpow


def implicit_solve_central(nu, rhs):
    """Solve ``x_j + nu*(x_{j+1} - x_{j-1})/2 = rhs_j`` by FFT."""
    rhs = np.asarray(rhs, dtype=float)
    if nu == 0.0:
        return rhs.copy()
    N = rhs.size
    k = np.arange(N)
    symbol = 1.0 + 1j * nu * np.sin(2.0 * np.pi * k / N)
    return np.real(np.fft.ifft(np.fft.fft(rhs) / symbol))


# ---------------------------------------------------------------------------
# exact solutions

def exact_smooth(spec: ScalarProblemSpec, t, x):
    """Sine wave of amplitude ``eps`` moving with ``c_m + c_a/eps``."""
    eps = spec.eps
    a = spec.c_m + spec.c_a / eps
    return 1.0 + 0.5 * eps * (1.0 + np.sin(2.0 * np.pi * eps * (np.asarray(x) - a * t)))


def exact_discontinuous(spec: ScalarProblemSpec, t, x):
    """Periodic rectangular bump of height ``eps`` on ``(L/4, 3L/4)``.

    ``L = c_m + c_a/eps`` is both the transport speed and the period.
    """
    eps = spec.eps
    a = spec.c_m + spec.c_a / eps
    phase = (np.asarray(x) - a * t) / a
    frac = phase - np.floor(phase)
    return np.where((frac > 0.25) & (frac < 0.75), 1.0 + eps, 1.0)


# ---------------------------------------------------------------------------
# problems and schemes

_EXPLICIT = {
    "upwind": upwind_op,
    "limited3": limited_op,
    "unlimited3": unlimited_op,
    "central": central_op,
}
_IMPLICIT = {
    "upwind": (upwind_op, implicit_solve_upwind),
    "central": (central_op, implicit_solve_central),
}


def make_problem(spec: ScalarProblemSpec, explicit="upwind", implicit="upwind"):
    """Semi-discrete problem for the chosen space discretisations."""
    ex = _EXPLICIT[explicit]
    im_op, im_solve = _IMPLICIT[implicit]
    dx, cm, ca = spec.dx, spec.c_m, spec.fast_speed
    return SemiDiscreteProblem(
        explicit_op=lambda w, t: ex(w, cm, dx),
        implicit_op=lambda w, t: im_op(w, ca, dx),
        implicit_solve=lambda nu, r, t: im_solve(nu * ca / dx, r),
        name=f"advection[{explicit}/{implicit}]",
    )


@dataclass(frozen=True)
class ScalarScheme:
    """Time scheme plus space discretisation for the scalar problem."""

    name: str
    time: TimeScheme
    explicit: str = "upwind"
    implicit: str = "upwind"

    def stepper(self, spec: ScalarProblemSpec):
        prob = make_problem(spec, self.explicit, self.implicit)
        return lambda w, dt, t: self.time.step(prob, w, dt, t)


def _ts(tab, theta=None, lam=None, name=""):
    th = None if theta is None else tuple(float(v) for v in theta)
    return TimeScheme(builtin(tab), th, None if lam is None else float(lam), name)


def _base_schemes(imex3_explicit="unlimited3", imex3_implicit="central",
                  ars_explicit="unlimited3", ars_implicit="upwind"):
    return {
        "IMEX1": ScalarScheme("IMEX1", _ts("IMEX1", name="IMEX1")),
        # four-stage convex scheme with every theta_k = 0 for k > 1: the
        # first-order update at the cost of TVD3(4)
        "IMEX1_4": ScalarScheme("IMEX1_4", _ts("TVD3_4", (1, 0, 0, 0, 0), 1.0, "IMEX1_4")),
        # four IMEX1 substeps of dt/4
        "IMEX1_4SUB": ScalarScheme("IMEX1_4SUB", _ts("IMEX1_4", name="IMEX1_4SUB")),
        "IMEX3": ScalarScheme("IMEX3", _ts("TVD3", name="IMEX3"), imex3_explicit, imex3_implicit),
        "IMEX3_4": ScalarScheme("IMEX3_4", _ts("TVD3_4", name="IMEX3_4"), imex3_explicit,
                                imex3_implicit),
        "ARS233": ScalarScheme("ARS233", _ts("ARS233", name="ARS233"), ars_explicit, ars_implicit),
        "TVD3": ScalarScheme("TVD3", _ts("TVD3", TVD3_THETA, TVD3_LAMBDA, "TVD3")),
        "TVD3_4": ScalarScheme("TVD3_4", _ts("TVD3_4", TVD3_4_THETA, TVD3_4_LAMBDA, "TVD3_4")),
        "TVD3_LIM": ScalarScheme("TVD3_LIM", _ts("TVD3", TVD3_THETA, TVD3_LAMBDA / 2, "TVD3"),
                                 "limited3", "upwind"),
        "TVD3_4_LIM": ScalarScheme("TVD3_4_LIM",
                                   _ts("TVD3_4", TVD3_4_THETA, TVD3_4_LAMBDA / 2, "TVD3_4"),
                                   "limited3", "upwind"),
    }


SCALAR_SCHEMES = tuple(_base_schemes()) + ("MOOD3", "MOOD3_4")
MOOD_LEVELS = {"MOOD3": ("IMEX3", "TVD3"), "MOOD3_4": ("IMEX3_4", "TVD3_4")}


def scalar_scheme(name: str, **options):
    """Look up a scheme by name.  MOOD names return a tuple of level names."""
    key = name.upper().replace("(", "_").replace(")", "")
    if key in MOOD_LEVELS:
        return MOOD_LEVELS[key]
    table = _base_schemes(**options)
    if key not in table:
        raise KeyError(f"unknown scalar scheme {name!r}")
    return table[key]


def _detector(w0):
    mid = 0.5 * (np.max(w0) + np.min(w0))
    return lambda w: w - mid


def total_variation(w):
    return float(np.sum(np.abs(np.roll(w, -1) - w)))


@dataclass
class ScalarRun:
    """Result of :func:`simulate`."""

    spec: ScalarProblemSpec
    scheme: str
    w: np.ndarray
    t: float
    times: list
    ranges: list
    exact_ranges: list
    maxima: list
    minima: list
    stats: object = None


def simulate(spec: ScalarProblemSpec, scheme, t_final=1.0, *, initial="discontinuous",
             cfl_mode="material", nu=0.5, dt=None, levels=None, keep_history=False,
             **options):
    """Run a scalar scheme (or MOOD cascade) from the exact initial data.

    Parameters
    ----------
    spec : ScalarProblemSpec
    scheme : str or ScalarScheme
        Name from :data:`SCALAR_SCHEMES`.
    initial : {"discontinuous", "smooth"}
    cfl_mode : {"material", "acoustic"}
    nu : float
        CFL number for ``cfl_mode``; ignored when ``dt`` is given.
    levels : sequence of str, optional
        Overrides the cascade for MOOD names, e.g. ``("IMEX3_4", "IMEX1_4")``.
    options
        Forwarded to :func:`scalar_scheme` (space discretisation choices).
    """
    exact = exact_discontinuous if initial == "discontinuous" else exact_smooth
    x = spec.x
    w0 = exact(spec, 0.0, x)
    if dt is None:
        dt = cfl_dt(cfl_mode, spec.dx, nu=nu, c_m=spec.c_m, c_a=spec.c_a, eps=spec.eps)
    rec = ScalarRun(spec, str(getattr(scheme, "name", scheme)), w0, 0.0, [], [], [], [], [])
    history = [] if keep_history else None

    def observer(n, t, w):
        we = exact(spec, t, x)
        rec.times.append(t)
        rec.maxima.append(float(np.max(w)))
        rec.minima.append(float(np.min(w)))
        rec.ranges.append(float(np.max(w) - np.min(w)))
        rec.exact_ranges.append(float(np.max(we) - np.min(we)))
        if history is not None:
            history.append(w.copy())

    sch = scheme if isinstance(scheme, ScalarScheme) else scalar_scheme(scheme, **options)
    dt_fn = lambda w, t, rem: dt  # noqa: E731
    if isinstance(sch, tuple) or levels is not None:
        names = levels if levels is not None else sch
        steppers = [scalar_scheme(n, **options).stepper(spec) for n in names]
        h = MoodHierarchy(steppers, _detector(w0), xi=0.0, time_dependent=False,
                          names=list(names))
        w, stats = mood_run(h, w0, t_final, dt_fn, observer)
        rec.stats = stats
    else:
        w, _ = integrate(sch.stepper(spec), w0, t_final, dt_fn, observer)
    rec.w = w
    rec.t = rec.times[-1] if rec.times else 0.0
    rec.w0 = w0
    rec.history = history
    return rec
