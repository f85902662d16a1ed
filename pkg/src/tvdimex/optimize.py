"""Multistart search for certified convex-combination IMEX tableaux.

The unknowns are the free entries of a CK tableau pair with shared weights,
the convex parameters and the CFL number.  Each restart runs SLSQP on

    maximise  lam + sum(theta)
    s.t.      third-order conditions, c_ex = c_im,
              every certificate coefficient >= 0,
              0 <= theta <= 1,  lam >= lam_floor,

and the best point is polished from perturbed copies and then certified with
an independent :func:`~tvdimex.certify.lambda_max_search`.
"""
from __future__ import annotations

import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .certify import (CertificateError, ConvexScheme, _recursion, lambda_max_search,
                      lemma1_theta3_opt, theorem1_certificate)
from .tableaux import TVD3_4_LAMBDA, TVD3_4_THETA, ImexTableau, builtin, order_check

__all__ = ["OptProblem", "OptResult", "optimize", "optimize_gamma", "pack", "unpack",
           "reference_start"]

ORDER_TOL = 1e-10
A_MARGIN = 1e-6


@dataclass(frozen=True)
class OptProblem:
    """Search space of the optimiser.

    Parameters
    ----------
    s : int
        Stages of the tableau (3 or 4).  The update is not forced to equal the
        last stage, so ``s + 1`` convex parameters are searched.
    lam_floor : float
    coef_bound : float
        Box for the tableau entries during the local search.
    theta_min : float
        Lower bound on the free convex parameters.  With the default 0 the
        objective is maximised by ``theta_{s+1} = 0, lam = 1``, where the update
        ignores every stage and the scheme is plain IMEX1; a positive floor
        excludes that point.
    """

    s: int = 4
    lam_floor: float = 0.5
    coef_bound: float = 2.0
    theta_min: float = 0.0

    def __post_init__(self):
        if self.s not in (3, 4):
            raise ValueError("s must be 3 or 4")
        if not 0.0 <= self.theta_min < 1.0:
            raise ValueError("theta_min must lie in [0, 1)")

    @property
    def n_ex(self):
        return self.s * (self.s - 1) // 2

    @property
    def n_im(self):
        return self.s * (self.s - 1) // 2

    @property
    def size(self):
        # explicit strict lower part, implicit lower part without the first
        # column, weights b_2..b_s (b_1 = 0 for the CK structure),
        # theta_2..theta_{s+1}, lam
        return self.n_ex + self.n_im + (self.s - 1) + self.s + 1


def unpack(problem: OptProblem, x):
    """``(A_ex, A_im, b, theta, lam)`` from a parameter vector."""
    s = problem.s
    x = np.asarray(x, dtype=float)
    A_ex = np.zeros((s, s))
    A_im = np.zeros((s, s))
    i = 0
    for k in range(1, s):
        A_ex[k, :k] = x[i:i + k]
        i += k
    for k in range(1, s):
        A_im[k, 1:k + 1] = x[i:i + k]
        i += k
    b = np.concatenate([[0.0], x[i:i + s - 1]])
    i += s - 1
    theta = np.concatenate([[1.0], x[i:i + s]])
    lam = float(x[i + s])
    return A_ex, A_im, b, theta, lam


def pack(problem: OptProblem, A_ex, A_im, b, theta, lam):
    s = problem.s
    parts = [A_ex[k, :k] for k in range(1, s)]
    parts += [A_im[k, 1:k + 1] for k in range(1, s)]
    parts += [np.asarray(b, float)[1:], np.asarray(theta, float)[1:], [lam]]
    return np.concatenate([np.ravel(p) for p in parts])


def _extended(A_ex, A_im, b):
    s = A_ex.shape[0]
    Ae = np.zeros((s + 1, s + 1))
    Ai = np.zeros((s + 1, s + 1))
    Ae[:s, :s], Ai[:s, :s] = A_ex, A_im
    Ae[s, :s], Ai[s, :s] = b, b
    return SimpleNamespace(s=s + 1, A_ex=Ae, A_im=Ai, c_ex=Ae.sum(1), c_im=Ai.sum(1))


def _equalities(problem, x):
    A_ex, A_im, b, _, _ = unpack(problem, x)
    ce, ci = A_ex.sum(1), A_im.sum(1)
    return np.concatenate([
        (ce - ci)[1:],
        [b.sum() - 1.0, b @ ce - 0.5, b @ (ce * ce) - 1.0 / 3.0,
         b @ A_ex @ ce - 1.0 / 6.0, b @ A_im @ ce - 1.0 / 6.0],
    ])


def _inequalities(problem, x):
    A_ex, A_im, b, theta, lam = unpack(problem, x)
    tab = _extended(A_ex, A_im, b)
    S = tab.s
    n_out = 2 * (S - 1) + (S - 1) * (S - 2) + (S - 1)
    try:
        A_cal, _, _, _, P, Q, Pkl, Qkl = _recursion(tab, theta, merge_first=True)
    except CertificateError:
        return -np.ones(n_out)
    vals = []
    for k in range(1, S):
        vals.append(A_cal[k] - (A_MARGIN if k < S - 1 else 0.0))
        vals.append(Q[k])
        vals.append(P[k] - lam * Q[k])
        for l in range(1, k):
            vals.append(Qkl[k, l])
            vals.append(Pkl[k, l] - lam * Qkl[k, l])
    return np.asarray(vals)


def _bounds(problem):
    cb = problem.coef_bound
    n_tab = problem.n_ex + problem.n_im
    bnds = [(-cb, cb)] * n_tab + [(-cb, cb)] * (problem.s - 1)
    bnds += [(problem.theta_min, 1.0)] * problem.s + [(problem.lam_floor, 10.0)]
    return bnds


def _objective(problem, x):
    _, _, _, theta, lam = unpack(problem, x)
    return -(lam + theta.sum())


def _random_start(problem, rng):
    s = problem.s
    c = np.sort(rng.uniform(0.0, 1.0, s - 1))
    A_ex = np.zeros((s, s))
    A_im = np.zeros((s, s))
    for k in range(1, s):
        w = rng.dirichlet(np.ones(k))
        A_ex[k, :k] = c[k - 1] * w
        wi = rng.dirichlet(np.ones(k))
        A_im[k, 1:k + 1] = c[k - 1] * wi
    b = np.concatenate([[0.0], rng.dirichlet(np.ones(s - 1))])
    theta = np.concatenate([[1.0], rng.uniform(problem.theta_min, 1.0, s)])
    lam = rng.uniform(problem.lam_floor, 1.0)
    return pack(problem, A_ex, A_im, b, theta, lam)


def _local(problem, x0, maxiter=300):
    cons = [{"type": "eq", "fun": lambda x: _equalities(problem, x)},
            {"type": "ineq", "fun": lambda x: _inequalities(problem, x)}]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = minimize(lambda x: _objective(problem, x), x0, method="SLSQP",
                       bounds=_bounds(problem), constraints=cons,
                       options={"maxiter": maxiter, "ftol": 1e-13})
    return res.x


def _violation(problem, x):
    eq = np.max(np.abs(_equalities(problem, x)))
    ineq = max(0.0, -np.min(_inequalities(problem, x)))
    return max(eq, ineq)


@dataclass
class OptResult:
    """Outcome of :func:`optimize`.

    ``scheme`` is ``None`` when no restart reached a certified point.
    ``objective`` uses the independently certified ``lambda_max``.
    """

    feasible: bool
    scheme: ConvexScheme = None
    objective: float = float("-inf")
    lam: float = 0.0
    restarts: int = 0
    n_feasible: int = 0
    history: list = field(default_factory=list)

    def to_dict(self):
        out = {"feasible": self.feasible, "objective": self.objective, "lambda": self.lam,
               "restarts": self.restarts, "n_feasible": self.n_feasible}
        if self.scheme is not None:
            out["theta"] = [float(t) for t in self.scheme.theta]
            out["tableau"] = self.scheme.tableau.to_dict()
        return out

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _certify(problem, x):
    """Build the tableau, check order 3 and certify; ``None`` if it fails."""
    A_ex, A_im, b, theta, _ = unpack(problem, x)
    try:
        tab = ImexTableau(A_ex, A_im, b, b, name=f"OPT{problem.s}")
        theta = np.clip(theta, problem.theta_min, 1.0)
        sch = ConvexScheme(tab, tuple(theta))
    except ValueError:
        return None
    if order_check(tab, 3, tol=ORDER_TOL).order_achieved < 3:
        return None
    lam = lambda_max_search(sch)
    if lam < problem.lam_floor:
        return None
    sch = ConvexScheme(tab, tuple(theta), lam, name=f"OPT{problem.s}")
    return sch, lam, lam + float(np.sum(theta))


def _restart(args):
    problem, seed, x0 = args
    rng = np.random.default_rng(seed)
    x = _local(problem, _random_start(problem, rng) if x0 is None else x0)
    return x, _violation(problem, x), -_objective(problem, x)


def optimize(problem: OptProblem = None, seed: int = 0, restarts: int = 200, *,
             x0=None, refine: int = 10, workers: int = 1) -> OptResult:
    """Multistart SLSQP with neighbourhood refinement.

    Parameters
    ----------
    problem : OptProblem
    seed : int
        Root seed; restart ``i`` uses the ``i``-th spawned stream, so results
        do not depend on ``workers``.
    restarts : int
    x0 : array, optional
        Warm start, used as restart 0 in addition to the random ones.
    refine : int
        Perturbed restarts around the incumbent.
    workers : int
        Process count for the restarts.
    """
    problem = problem or OptProblem()
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    seeds = np.random.SeedSequence(seed).spawn(restarts + refine)
    jobs = [(problem, seeds[i], None) for i in range(restarts)]
    if x0 is not None:
        jobs.insert(0, (problem, seeds[0], np.asarray(x0, float)))
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            outs = list(ex.map(_restart, jobs))
    else:
        outs = [_restart(j) for j in jobs]

    best = OptResult(False, restarts=len(jobs))
    candidates = []
    for x, viol, obj in outs:
        if viol < 1e-8:
            candidates.append((obj, x))
    best.n_feasible = len(candidates)
    candidates.sort(key=lambda c: -c[0])

    def consider(x):
        got = _certify(problem, x)
        if got is not None and got[2] > best.objective:
            best.feasible = True
            best.scheme, best.lam, best.objective = got
            best.history.append(best.objective)
            return True
        return False

    for _, x in candidates:
        # the modelled optimum can sit a hair outside the certified region;
        # take the first one that certifies, in order of objective
        if consider(x):
            break
    if best.feasible:
        x_best = pack(problem, best.scheme.tableau.A_ex, best.scheme.tableau.A_im,
                      best.scheme.tableau.b_ex, best.scheme.theta, best.lam)
        for i in range(refine):
            rng = np.random.default_rng(seeds[restarts + i])
            xp = x_best + rng.normal(scale=1e-3, size=x_best.size)
            xp[-1] = max(xp[-1], problem.lam_floor)
            x = _local(problem, xp)
            if _violation(problem, x) < 1e-8 and consider(x):
                x_best = x
    return best


def reference_start(problem: OptProblem = None):
    """Parameter vector of the built-in TVD3_4 scheme."""
    problem = problem or OptProblem()
    t = builtin("TVD3_4")
    return pack(problem, t.A_ex, t.A_im, t.b_ex, TVD3_4_THETA, TVD3_4_LAMBDA)


def optimize_gamma(bounds=(0.35, 5.0)):
    """Maximise the admissible third-stage parameter over the family.

    Returns ``(gamma, theta3)``; the maximiser is ``gamma = 2/3``.
    """
    res = minimize_scalar(lambda g: -lemma1_theta3_opt(g), bounds=bounds, method="bounded",
                          options={"xatol": 1e-12})
    return float(res.x), float(-res.fun)


def certify_result(result: OptResult, lam=None, tol=None):
    """Re-run the certificate of an optimiser result at ``lam`` (default: its own)."""
    kw = {} if tol is None else {"tol": tol}
    return theorem1_certificate(result.scheme, result.lam if lam is None else lam, **kw)
