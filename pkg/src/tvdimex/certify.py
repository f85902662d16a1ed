"""TVD and maximum-principle certificates for convex-combination IMEX schemes.

The stage ``k`` of a convex-combination scheme applied to the upwind
semi-discretisation of linear advection reads

    w(k) + mu*A_k*D(k) = w(n) - lam*[(1-th_k) ct_k D(n) + th_k sum_l at_kl D(l)]
                         - mu*th_k sum_l a_kl D(l)

with ``D(.)`` the backward difference.  Eliminating every ``mu*D(l)`` with the
earlier stage equations writes the right-hand side as a combination of
``w(n)_j``, ``w(n)_{j-1}`` and the earlier stages.  Non-negative coefficients
give the maximum principle and the TVD property without an ``eps``-dependent
time step restriction.  Each coefficient is affine in ``lam``, so the largest
admissible ``lam`` follows in closed form.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import sqrt

import numpy as np

from .tableaux import ImexTableau

__all__ = [
    "ConvexScheme",
    "Certificate",
    "lemma1_theta3_opt",
    "lemma1_bounds",
    "alpha_parameterization",
    "theorem1_certificate",
    "theorem2_certificate",
    "lambda_max_search",
    "FEAS_TOL",
    "LAMBDA_CAP",
]

FEAS_TOL = 1e-12
LAMBDA_CAP = 100.0


class CertificateError(ValueError):
    """Raised for tableaux the requested certificate does not apply to."""


@dataclass(frozen=True, eq=False)
class ConvexScheme:
    """Tableau plus convex-combination parameters.

    Parameters
    ----------
    tableau : ImexTableau
    theta : sequence of float
        One entry per stage, plus one for the update when the tableau is not
        stiffly accurate.  ``theta[0]`` must be 1.
    lambda_max : float, optional
        Certified CFL number ``dt * c_m / dx``.
    """

    tableau: ImexTableau
    theta: tuple
    lambda_max: float = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        th = np.array([float(t) for t in self.theta])
        need = self.tableau.s + (0 if self.tableau.is_stiffly_accurate else 1)
        if th.shape != (need,):
            raise ValueError(f"theta needs {need} entries, got {th.size}")
        if th[0] != 1.0:
            raise ValueError("theta[0] must be 1")
        if np.any(th < 0.0) or np.any(th > 1.0):
            raise ValueError("theta entries must lie in [0, 1]")
        if self.lambda_max is not None and self.lambda_max < 0:
            raise ValueError("lambda_max must be non-negative")
        th.setflags(write=False)
        object.__setattr__(self, "theta", th)
        if not self.name:
            object.__setattr__(self, "name", self.tableau.name)

    @cached_property
    def stage_tableau(self) -> ImexTableau:
        """Tableau with the update appended as a stage when needed."""
        return self.tableau.extended()


@dataclass
class Certificate:
    """Coefficients of one certificate evaluation.

    Attributes
    ----------
    feasible : bool
    A_cal, Atil_cal : ndarray, shape (S,)
    B_cal, Btil_cal : ndarray, shape (S, S)
    C_cal, D_cal : ndarray, shape (S,)
        Coefficients multiplying ``w(n)`` (CK layout: ``D`` on
        ``w(n)_j``, ``lam*C`` on ``w(n)_{j-1}``; general layout: ``C`` is the
        total ``w(n)`` weight and ``Ctil`` its upwind part).
    C_kl, D_kl : ndarray, shape (S, S)
        Same for earlier stages.
    constraints : list of (label, value)
        Every inequality written as ``value >= 0``.
    """

    feasible: bool
    lam: float
    A_cal: np.ndarray
    Atil_cal: np.ndarray
    B_cal: np.ndarray
    Btil_cal: np.ndarray
    C_cal: np.ndarray
    D_cal: np.ndarray
    C_kl: np.ndarray
    D_kl: np.ndarray
    constraints: list
    Ctil_cal: np.ndarray = None
    Dtil_kl: np.ndarray = None

    def binding(self, n=3):
        """Labels of the ``n`` constraints with the smallest slack."""
        return [lab for lab, _ in sorted(self.constraints, key=lambda c: c[1])[:n]]


# ---------------------------------------------------------------------------
# closed forms for the three-stage family

def lemma1_theta3_opt(gamma):
    """Largest admissible third-stage parameter, ``(3g-1)/(6g^2)``."""
    if gamma <= Fraction(1, 3):
        raise ValueError("gamma must exceed 1/3")
    return (3 * gamma - 1) / (6 * gamma**2)


def lemma1_bounds(gamma, theta4):
    """Return ``(theta4_max, lambda_max)`` for the three-stage family.

    Exact when both arguments are :class:`~fractions.Fraction`.
    """
    if float(gamma) < sqrt(3.0) / 3.0:
        raise ValueError("infeasible gamma: need gamma >= sqrt(3)/3")
    g = gamma
    t4max = (3 * g - 1) * (3 * g**2 + 1) / (18 * g**3)
    if not 0 < theta4 < t4max:
        raise ValueError(f"infeasible theta4: need 0 < theta4 < {float(t4max)}")
    lam = ((18 * g**3 * theta4 - (3 * g - 1) * (3 * g**2 + 1))
           / ((3 * g - 1) * ((6 * g**2 + 1) * theta4 - (3 * g**2 + 1))))
    return t4max, lam


def alpha_parameterization(alpha):
    """Map ``alpha`` in (0, 1) to ``(theta4, lambda)`` at gamma = 2/3."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    one = Fraction(1) if isinstance(alpha, Fraction) else 1.0
    c7, c11 = Fraction(7, 16), Fraction(11, 16)
    if not isinstance(alpha, Fraction):
        c7, c11 = float(c7), float(c11)
    return c7 * alpha, (one - alpha) / (one - c11 * alpha)


# ---------------------------------------------------------------------------
# recursive certificates

def _as_scheme(scheme, theta=None):
    if isinstance(scheme, ConvexScheme):
        return scheme
    if theta is None:
        raise TypeError("pass a ConvexScheme or a tableau with theta")
    return ConvexScheme(scheme, tuple(theta))


def _recursion(tab: ImexTableau, theta: np.ndarray, merge_first: bool):
    """Coefficients ``P`` (total weight) and ``Q`` (upwind weight / lam).

    Arrays are indexed by stage (0-based).  ``P[k]``/``Q[k]``
    belong to ``w(n)``; ``Pkl[k, l]``/``Qkl[k, l]`` to stage ``l``.  With
    ``merge_first`` the first stage is identified with ``w(n)``.
    """
    S = tab.s
    Ae, Ai, ce, ci = tab.A_ex, tab.A_im, tab.c_ex, tab.c_im
    A_cal = theta * np.diag(Ai) + (1.0 - theta) * ci
    Atil = (1.0 - theta) * ce
    if merge_first:
        Atil = Atil + theta * Ae[:, 0]
    B = np.zeros((S, S))
    Bt = np.zeros((S, S))
    first = 1 if merge_first else 0
    for k in range(S):
        for l in range(first, k):
            Bt[k, l] = theta[k] * Ae[k, l]
            if Ai[k, l] != 0.0:
                if A_cal[l] <= 0.0:
                    raise CertificateError(f"stage {l + 1} has no implicit weight")
                B[k, l] = theta[k] * Ai[k, l] / A_cal[l]
    P = np.zeros(S)
    Q = np.zeros(S)
    Pkl = np.zeros((S, S))
    Qkl = np.zeros((S, S))
    for k in range(first, S):
        ls = range(first, k)
        P[k] = 1.0 - sum(B[k, l] * P[l] for l in ls)
        Q[k] = Atil[k] - sum(B[k, l] * Q[l] for l in ls)
        for l in ls:
            rs = range(l + 1, k)
            Pkl[k, l] = B[k, l] - sum(B[k, r] * Pkl[r, l] for r in rs)
            Qkl[k, l] = Bt[k, l] - sum(B[k, r] * Qkl[r, l] for r in rs)
    return A_cal, Atil, B, Bt, P, Q, Pkl, Qkl


def _a_constraints(A_cal, first, tol):
    S = A_cal.size
    cons = []
    for k in range(first, S):
        # The appended update stage is explicit in its own unknown, so a zero
        # weight there is admissible; interior stages need a strictly positive one.
        val = A_cal[k] if k == S - 1 else A_cal[k] - FEAS_TOL
        cons.append((f"A[{k + 1}]>0", val))
    return cons


def theorem1_certificate(scheme, lam, theta=None, tol=FEAS_TOL) -> Certificate:
    """Evaluate the CK certificate at CFL number ``lam``.

    Non stiffly accurate tableaux are extended by one explicit stage first.

    Parameters
    ----------
    scheme : ConvexScheme or ImexTableau
    lam : float
    theta : sequence, optional
        Required when ``scheme`` is a bare tableau.
    tol : float
        Slack granted to every ``>= 0`` constraint.
    """
    sch = _as_scheme(scheme, theta)
    tab = sch.stage_tableau
    if not tab.is_ck:
        raise CertificateError("tableau is not of CK type; use theorem2_certificate")
    th = sch.theta
    A_cal, Atil, B, Bt, P, Q, Pkl, Qkl = _recursion(tab, th, merge_first=True)
    S = tab.s
    C = Q
    D = P - lam * Q
    Ckl = Qkl
    Dkl = Pkl - lam * Qkl
    cons = _a_constraints(A_cal, 1, tol)
    for k in range(1, S):
        cons.append((f"C[{k + 1}]", C[k] + tol))
        cons.append((f"D[{k + 1}]", D[k] + tol))
        for l in range(1, k):
            cons.append((f"C[{k + 1},{l + 1}]", Ckl[k, l] + tol))
            cons.append((f"D[{k + 1},{l + 1}]", Dkl[k, l] + tol))
    feasible = all(v >= 0.0 for _, v in cons)
    return Certificate(feasible, float(lam), A_cal, Atil, B, Bt, C, D, Ckl, Dkl, cons)


def theorem2_certificate(scheme, lam, theta=None, tol=FEAS_TOL) -> Certificate:
    """Evaluate the certificate for tableaux with an implicit first stage.

    A CK tableau (zero first implicit column) is accepted as well; its first
    stage then coincides with ``w(n)`` and is merged into it, which reproduces
    :func:`theorem1_certificate` in the general layout.
    """
    sch = _as_scheme(scheme, theta)
    tab = sch.stage_tableau
    th = sch.theta
    merge = bool(np.all(tab.A_im[:, 0] == 0.0))
    A_cal, Atil, B, Bt, P, Q, Pkl, Qkl = _recursion(tab, th, merge_first=merge)
    S = tab.s
    first = 1 if merge else 0
    cons = _a_constraints(A_cal, first, tol)
    for k in range(first, S):
        cons.append((f"lam*Ct[{k + 1}]>=0", lam * Q[k] + tol))
        cons.append((f"C[{k + 1}]-lam*Ct[{k + 1}]", P[k] - lam * Q[k] + tol))
        for l in range(first, k):
            cons.append((f"lam*Dt[{k + 1},{l + 1}]>=0", lam * Qkl[k, l] + tol))
            cons.append((f"D[{k + 1},{l + 1}]-lam*Dt[{k + 1},{l + 1}]",
                         Pkl[k, l] - lam * Qkl[k, l] + tol))
    feasible = all(v >= 0.0 for _, v in cons)
    return Certificate(feasible, float(lam), A_cal, Atil, B, Bt, P, P - lam * Q,
                       Pkl, Pkl - lam * Qkl, cons, Ctil_cal=Q, Dtil_kl=Qkl)


def lambda_max_search(scheme, theta=None, cap: float = LAMBDA_CAP, tol: float = FEAS_TOL) -> float:
    """Largest ``lam`` in ``[0, cap]`` with a feasible certificate.

    Every constraint is affine in ``lam``, so it is evaluated at two points
    and the bound is solved for directly.  Returns 0 when the certificate
    fails already at ``lam = 0``.
    """
    sch = _as_scheme(scheme, theta)
    cert = (theorem1_certificate if sch.stage_tableau.is_ck else theorem2_certificate)
    try:
        c0 = cert(sch, 0.0, tol=tol)
    except CertificateError:
        return 0.0
    if not c0.feasible:
        return 0.0
    c1 = cert(sch, 1.0, tol=tol)
    lam = float(cap)
    for (_, v0), (_, v1) in zip(c0.constraints, c1.constraints):
        slope = v1 - v0
        if slope < 0.0:
            lam = min(lam, -v0 / slope)
    # Undo the feasibility tolerance so the bound is not inflated by it.
    while lam > 0.0 and not cert(sch, lam, tol=tol).feasible:
        lam = np.nextafter(lam, 0.0)
    return max(lam, 0.0)
