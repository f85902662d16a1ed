"""A posteriori MOOD driver for implicit-explicit schemes.

Because the implicit part couples every cell, a rejected candidate is
recomputed on the whole grid with the next scheme of the cascade.  The last
level (the parachute) is always accepted.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = ["MoodHierarchy", "MoodStats", "mood_step", "run", "integrate",
           "dmp_ok", "DMP_RTOL", "DMP_ATOL", "STEP_FAILURES"]

log = logging.getLogger(__name__)

DMP_RTOL = 1e-12
DMP_ATOL = 1e-14
PARACHUTE_TOL = 1e-10
STEP_FAILURES = (FloatingPointError, ValueError, ArithmeticError, np.linalg.LinAlgError)


def dmp_ok(phi_norm: float, threshold: float) -> bool:
    """Discrete maximum principle test with a round-off allowance."""
    return phi_norm <= threshold * (1.0 + DMP_RTOL) + DMP_ATOL


@dataclass
class MoodHierarchy:
    """Cascade of steppers from highest order to parachute.

    Parameters
    ----------
    levels : sequence of callable
        ``step(w, dt, t) -> w_new``; index 0 is the candidate scheme.
    detector : callable
        ``Phi(w) -> array``; its max-norm is compared with the threshold.
    xi : float
        Threshold relaxation in [0, 1].
    time_dependent : bool
        If False the threshold stays at its initial value.
    names : sequence of str, optional
    """

    levels: Sequence[Callable]
    detector: Callable
    xi: float = 0.0
    time_dependent: bool = False
    names: Sequence[str] = None

    def __post_init__(self):
        if len(self.levels) < 2:
            raise ValueError("a MOOD hierarchy needs at least two levels")
        if not 0.0 <= self.xi <= 1.0:
            raise ValueError("xi must lie in [0, 1]")
        if self.names is None:
            self.names = [f"level{i}" for i in range(len(self.levels))]

    def phi_norm(self, w) -> float:
        return float(np.max(np.abs(self.detector(w))))


@dataclass
class MoodStats:
    """Per-step record of the level that produced the accepted state."""

    n_levels: int
    levels_used: list = field(default_factory=list)
    thresholds: list = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.levels_used)

    @property
    def activations_per_level(self) -> list:
        """Number of steps that reached each level (level 0 counts all)."""
        used = np.asarray(self.levels_used, dtype=int)
        return [int(np.sum(used >= i)) for i in range(self.n_levels)]

    @property
    def mood_activations(self) -> int:
        """Steps in which the candidate was rejected."""
        return int(sum(1 for lv in self.levels_used if lv > 0))

    @property
    def acceptance_rate(self) -> float:
        if not self.levels_used:
            return 1.0
        return float(np.mean(np.asarray(self.levels_used) == 0))

    def to_dict(self) -> dict:
        return {
            "steps": self.steps,
            "activations_per_level": self.activations_per_level,
            "acceptance_rate": self.acceptance_rate,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def mood_step(h: MoodHierarchy, w, dt: float, t: float, threshold: float,
              threshold0: float):
    """One step of the cascade.

    Returns
    -------
    w_new, level_used, threshold_new
    """
    last = len(h.levels) - 1
    for level, step in enumerate(h.levels):
        try:
            cand = step(w, dt, t)
            norm = h.phi_norm(cand)
        except STEP_FAILURES as exc:
            # a failed solve or an inadmissible state counts as a rejection
            if level == last:
                raise
            log.debug("level %d failed: %s", level, exc)
            continue
        if dmp_ok(norm, threshold):
            break
        if level == last:
            if norm > threshold + PARACHUTE_TOL * max(1.0, abs(threshold)):
                log.warning("parachute output violates the detection bound: %.3e > %.3e",
                            norm, threshold)
            break
    if h.time_dependent:
        new_thr = h.xi * norm + (1.0 - h.xi) * threshold
    else:
        new_thr = threshold0
    return cand, level, new_thr


def integrate(step: Callable, w0, t_final: float, dt_fn: Callable, observer=None,
              max_steps: int = 10_000_000):
    """March ``step(w, dt, t)`` from 0 to ``t_final``.

    ``dt_fn(w, t, remaining)`` returns the step size; the last step is cut
    to land on ``t_final``.  ``observer(n, t, w)`` is called after each step.
    Returns the final state and time.
    """
    w, t, n = w0, 0.0, 0
    while t < t_final * (1.0 - 1e-14) and n < max_steps:
        remaining = t_final - t
        dt = min(dt_fn(w, t, remaining), remaining)
        w = step(w, dt, t)
        t = t_final if remaining - dt <= 1e-14 * max(1.0, t_final) else t + dt
        n += 1
        if observer is not None:
            observer(n, t, w)
    return w, t


def run(h: MoodHierarchy, w0, t_final: float, dt_fn: Callable, observer=None):
    """Loop :func:`mood_step` to ``t_final``.

    Returns
    -------
    w, stats : ndarray, MoodStats
    """
    thr0 = h.phi_norm(w0)
    state = {"thr": thr0}
    stats = MoodStats(len(h.levels))

    def step(w, dt, t):
        w_new, level, state["thr"] = mood_step(h, w, dt, t, state["thr"], thr0)
        stats.levels_used.append(level)
        stats.thresholds.append(state["thr"])
        return w_new

    w, _ = integrate(step, w0, t_final, dt_fn, observer)
    return w, stats
