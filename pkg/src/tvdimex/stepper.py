"""Convex-combination and plain IMEX Runge-Kutta steppers.

A problem supplies an explicit tendency, an implicit tendency and a solver for
``x - nu * implicit_op(x) = rhs``.  The steppers never look inside the state,
so scalar grids and stacked Euler fields are handled alike.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .certify import ConvexScheme
from .tableaux import ImexTableau

__all__ = [
    "SemiDiscreteProblem",
    "TimeScheme",
    "step_convex",
    "step_plain",
    "cfl_dt",
    "SPEED_FLOOR",
]

SPEED_FLOOR = 1e-12


@dataclass
class SemiDiscreteProblem:
    """Split semi-discrete system ``w' = explicit_op(w) + implicit_op(w)``.

    Parameters
    ----------
    explicit_op, implicit_op : callable
        ``f(w, t) -> tendency``.
    implicit_solve : callable
        ``g(nu, rhs, t) -> x`` solving ``x - nu * implicit_op(x, t) = rhs``.
    """

    explicit_op: Callable
    implicit_op: Callable
    implicit_solve: Callable
    name: str = "problem"


def _check(w, where):
    if not np.all(np.isfinite(w)):
        raise FloatingPointError(f"non-finite values in {where}")
    return w


def step_convex(problem: SemiDiscreteProblem, w, dt: float, scheme: ConvexScheme,
                t: float = 0.0):
    """Advance one step with the convex-combination scheme.

    Stage ``k`` solves

        w(k) - dt*A_k*I(w(k)) = w(n) + dt*[(1-th_k) ct_k E(w(n))
                                + th_k sum_l at_kl E(w(l)) + th_k sum_l a_kl I(w(l))]

    with ``A_k = th_k a_kk + (1-th_k) c_k``.  Non stiffly accurate tableaux
    carry the update as an extra stage, so the returned state is always the
    last stage.
    """
    tab = scheme.stage_tableau
    th = scheme.theta
    Ae, Ai, ce, ci = tab.A_ex, tab.A_im, tab.c_ex, tab.c_im
    S = tab.s
    E_n = None
    E, I = [], []
    wk = w
    for k in range(S):
        ck_t = t + ce[k] * dt
        if k == 0 and Ai[0, 0] == 0.0:
            wk = w
        else:
            rhs = w
            if th[k] < 1.0 and ce[k] != 0.0:
                if E_n is None:
                    E_n = E[0] if (k > 0 and Ai[0, 0] == 0.0) else problem.explicit_op(w, t)
                rhs = rhs + dt * (1.0 - th[k]) * ce[k] * E_n
            for l in range(k):
                coef_e = th[k] * Ae[k, l]
                coef_i = th[k] * Ai[k, l]
                if coef_e != 0.0:
                    rhs = rhs + dt * coef_e * E[l]
                if coef_i != 0.0:
                    rhs = rhs + dt * coef_i * I[l]
            nu = dt * (th[k] * Ai[k, k] + (1.0 - th[k]) * ci[k])
            wk = problem.implicit_solve(nu, rhs, ck_t) if nu != 0.0 else rhs
            _check(wk, f"stage {k + 1}")
        if k < S - 1:
            E.append(problem.explicit_op(wk, ck_t))
            I.append(problem.implicit_op(wk, t + ci[k] * dt))
    return wk


def step_plain(problem: SemiDiscreteProblem, w, dt: float, tableau: ImexTableau,
               t: float = 0.0):
    """Standard IMEX-RK step with the raw tableau."""
    Ae, Ai, be, bi = tableau.A_ex, tableau.A_im, tableau.b_ex, tableau.b_im
    S = tableau.s
    E, I = [], []
    for k in range(S):
        rhs = w
        for l in range(k):
            if Ae[k, l] != 0.0:
                rhs = rhs + dt * Ae[k, l] * E[l]
            if Ai[k, l] != 0.0:
                rhs = rhs + dt * Ai[k, l] * I[l]
        nu = dt * Ai[k, k]
        wk = problem.implicit_solve(nu, rhs, t + tableau.c_im[k] * dt) if nu != 0.0 else rhs
        _check(wk, f"stage {k + 1}")
        E.append(problem.explicit_op(wk, t + tableau.c_ex[k] * dt))
        I.append(problem.implicit_op(wk, t + tableau.c_im[k] * dt))
    if tableau.is_stiffly_accurate:
        return wk
    out = w
    for k in range(S):
        if be[k] != 0.0:
            out = out + dt * be[k] * E[k]
        if bi[k] != 0.0:
            out = out + dt * bi[k] * I[k]
    return _check(out, "update")


@dataclass(frozen=True)
class TimeScheme:
    """Time integrator choice: convex-combination or plain IMEX-RK.

    Parameters
    ----------
    tableau : ImexTableau
    theta : tuple or None
        Convex parameters; ``None`` selects the plain IMEX-RK update.
    lam : float or None
        Certified CFL number, for bookkeeping.
    """

    tableau: ImexTableau
    theta: tuple = None
    lam: float = None
    name: str = ""

    @property
    def convex(self) -> ConvexScheme:
        return ConvexScheme(self.tableau, self.theta, self.lam)

    def step(self, problem, w, dt, t=0.0):
        if self.theta is None:
            return step_plain(problem, w, dt, self.tableau, t)
        return step_convex(problem, w, dt, self.convex, t)


def cfl_dt(mode: str, dx: float, *, nu: float, c_m: float = 1.0, c_a: float = 1.0,
           eps: float = 1.0, max_normal_speed: float = None,
           remaining: float = None) -> float:
    """Time step from a CFL rule.

    Parameters
    ----------
    mode : {"acoustic", "material", "euler"}
        ``acoustic``: ``eps*nu*dx/(eps*c_m + c_a)``; ``material``:
        ``nu*dx/c_m``; ``euler``: ``nu*dx/(2*max|u.n|)``.
    remaining : float, optional
        Caps the step so the final time is hit exactly.
    """
    if mode == "acoustic":
        dt = eps * nu * dx / max(eps * c_m + c_a, SPEED_FLOOR)
    elif mode == "material":
        dt = nu * dx / max(c_m, SPEED_FLOOR)
    elif mode == "euler":
        if max_normal_speed is None:
            raise ValueError("euler mode needs max_normal_speed")
        dt = nu * dx / (2.0 * max(max_normal_speed, SPEED_FLOOR))
    else:
        raise ValueError(f"unknown CFL mode {mode!r}")
    if remaining is not None:
        dt = min(dt, remaining)
    return dt
