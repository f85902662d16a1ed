"""Double Butcher tableaux for IMEX Runge-Kutta schemes.

An IMEX scheme pairs a strictly lower triangular explicit tableau with a
lower triangular (diagonally implicit) one.  All coefficients are stored as
float64; tableaux printed as fractions are built from exact rationals first.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations_with_replacement

import numpy as np

__all__ = [
    "ImexTableau",
    "OrderReport",
    "build_tvd3_family",
    "builtin",
    "order_check",
    "BUILTIN_NAMES",
    "TVD3_THETA",
    "TVD3_LAMBDA",
    "TVD3_4_THETA",
    "TVD3_4_LAMBDA",
]

C_TOL = 1e-13
ORDER_TOL = 1e-12


def _frozen(values, ndim):
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"expected {ndim}-d coefficients, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ImexTableau:
    """Explicit/implicit Butcher tableau pair.

    Parameters
    ----------
    A_ex, A_im : (s, s) array_like
        Explicit (strictly lower triangular) and implicit (lower triangular)
        coefficient matrices.
    b_ex, b_im : (s,) array_like
        Quadrature weights.
    c_ex, c_im : (s,) array_like, optional
        Abscissae.  Computed from the row sums when omitted.
    name : str
        Label used in reports.
    """

    A_ex: np.ndarray
    A_im: np.ndarray
    b_ex: np.ndarray
    b_im: np.ndarray
    c_ex: np.ndarray = None
    c_im: np.ndarray = None
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        A_ex = _frozen(self.A_ex, 2)
        A_im = _frozen(self.A_im, 2)
        s = A_ex.shape[0]
        if A_ex.shape != (s, s) or A_im.shape != (s, s):
            raise ValueError("A_ex and A_im must both be square with the same size")
        b_ex = _frozen(self.b_ex, 1)
        b_im = _frozen(self.b_im, 1)
        if b_ex.shape != (s,) or b_im.shape != (s,):
            raise ValueError("weight vectors must have length s")
        c_ex = _frozen(A_ex.sum(axis=1) if self.c_ex is None else self.c_ex, 1)
        c_im = _frozen(A_im.sum(axis=1) if self.c_im is None else self.c_im, 1)
        if c_ex.shape != (s,) or c_im.shape != (s,):
            raise ValueError("abscissae must have length s")
        if np.any(np.triu(A_ex) != 0.0):
            raise ValueError("explicit tableau must be strictly lower triangular")
        if np.any(np.triu(A_im, 1) != 0.0):
            raise ValueError("implicit tableau must be lower triangular")
        if np.max(np.abs(c_ex - A_ex.sum(axis=1))) > C_TOL:
            raise ValueError("c_ex inconsistent with explicit row sums")
        if np.max(np.abs(c_im - A_im.sum(axis=1))) > C_TOL:
            raise ValueError("c_im inconsistent with implicit row sums")
        for key, val in dict(A_ex=A_ex, A_im=A_im, b_ex=b_ex, b_im=b_im,
                             c_ex=c_ex, c_im=c_im).items():
            object.__setattr__(self, key, val)

    @property
    def s(self) -> int:
        return self.A_ex.shape[0]

    @property
    def is_ck(self) -> bool:
        """First implicit column zero (hence a_11 = 0) and b_1 = 0."""
        return bool(np.all(self.A_im[:, 0] == 0.0) and self.b_im[0] == 0.0)

    @property
    def is_stiffly_accurate(self) -> bool:
        """Both weight vectors equal the last rows of their matrices."""
        return bool(np.array_equal(self.b_ex, self.A_ex[-1])
                    and np.array_equal(self.b_im, self.A_im[-1]))

    def extended(self) -> "ImexTableau":
        """Append the update as an extra stage with a zero diagonal entry.

        Stiffly accurate tableaux are returned unchanged.
        """
        if self.is_stiffly_accurate:
            return self
        s = self.s
        A_ex = np.zeros((s + 1, s + 1))
        A_im = np.zeros((s + 1, s + 1))
        A_ex[:s, :s] = self.A_ex
        A_im[:s, :s] = self.A_im
        A_ex[s, :s] = self.b_ex
        A_im[s, :s] = self.b_im
        return ImexTableau(A_ex, A_im, A_ex[s], A_im[s], name=f"{self.name}+update")

    def to_dict(self) -> dict:
        return {
            "s": self.s,
            "A_ex": self.A_ex.tolist(),
            "A_im": self.A_im.tolist(),
            "b_ex": self.b_ex.tolist(),
            "b_im": self.b_im.tolist(),
            "c_ex": self.c_ex.tolist(),
            "c_im": self.c_im.tolist(),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict, name: str = "custom") -> "ImexTableau":
        tab = cls(data["A_ex"], data["A_im"], data["b_ex"], data["b_im"],
                  data.get("c_ex"), data.get("c_im"), name=data.get("name", name))
        if "s" in data and int(data["s"]) != tab.s:
            raise ValueError(f"declared s={data['s']} but matrices have s={tab.s}")
        return tab

    @classmethod
    def from_json(cls, text: str, name: str = "custom") -> "ImexTableau":
        return cls.from_dict(json.loads(text), name=name)

    def __eq__(self, other):
        if not isinstance(other, ImexTableau):
            return NotImplemented
        return all(np.array_equal(getattr(self, k), getattr(other, k))
                   for k in ("A_ex", "A_im", "b_ex", "b_im", "c_ex", "c_im"))

    def __hash__(self):
        return hash((self.A_ex.tobytes(), self.A_im.tobytes(),
                     self.b_ex.tobytes(), self.b_im.tobytes()))

    def __repr__(self):
        return f"ImexTableau(name={self.name!r}, s={self.s})"


# ---------------------------------------------------------------------------
# order conditions

@dataclass(frozen=True)
class OrderReport:
    order_achieved: int
    residuals: list  # [(name, residual)]

    def max_residual(self, order=None) -> float:
        vals = [abs(r) for n, r in self.residuals
                if order is None or _order_of(n) <= order]
        return max(vals) if vals else 0.0


def _order_of(name: str) -> int:
    return int(name.split(":", 1)[0][1:])


def _conditions(t: ImexTableau, p: int):
    """Yield (order, label, residual) for the coupled IMEX conditions."""
    weights = {"be": t.b_ex, "bi": t.b_im}
    absc = {"ce": t.c_ex, "ci": t.c_im}
    mats = {"Ae": t.A_ex, "Ai": t.A_im}
    for bn, b in weights.items():
        yield 1, f"sum({bn})", b.sum() - 1.0
    if p < 2:
        return
    for bn, b in weights.items():
        for cn, c in absc.items():
            yield 2, f"{bn}.{cn}", b @ c - 0.5
    if p < 3:
        return
    for bn, b in weights.items():
        for (cn1, c1), (cn2, c2) in combinations_with_replacement(absc.items(), 2):
            yield 3, f"{bn}.({cn1}*{cn2})", b @ (c1 * c2) - 1.0 / 3.0
        for an, A in mats.items():
            for cn, c in absc.items():
                yield 3, f"{bn}.{an}.{cn}", b @ A @ c - 1.0 / 6.0


def order_check(t: ImexTableau, p: int, tol: float = ORDER_TOL) -> OrderReport:
    """Evaluate coupled IMEX order conditions up to order ``p`` (1..3).

    Conditions include the pure explicit, pure implicit and all mixed
    (coupling) trees.  ``order_achieved`` is the largest q <= p such that every
    residual of order <= q is within ``tol``.
    """
    if not 1 <= p <= 3:
        raise ValueError("order conditions implemented for 1 <= p <= 3")
    residuals = [(f"p{o}:{label}", float(r)) for o, label, r in _conditions(t, p)]
    achieved = 0
    for q in range(1, p + 1):
        if all(abs(r) <= tol for n, r in residuals if _order_of(n) == q):
            achieved = q
        else:
            break
    return OrderReport(achieved, residuals)


# ---------------------------------------------------------------------------
# constructors

def _tableau_from_fractions(A_ex, A_im, b_ex, b_im, name):
    to_f = np.vectorize(float, otypes=[float])
    return ImexTableau(to_f(np.array(A_ex, dtype=object)),
                       to_f(np.array(A_im, dtype=object)),
                       to_f(np.array(b_ex, dtype=object)),
                       to_f(np.array(b_im, dtype=object)),
                       name=name)


def build_tvd3_family(gamma) -> ImexTableau:
    """Three-stage, third-order CK tableau pair parameterised by ``gamma``.

    ``gamma`` may be a float or a :class:`fractions.Fraction`; rational input
    keeps every coefficient exact until the final conversion to float.
    """
    g = Fraction(gamma) if isinstance(gamma, (int, Fraction)) else gamma
    if g == 0 or g * 3 == 1:
        raise ValueError("gamma must not be 0 or 1/3")
    if isinstance(g, float) and (abs(g) < 1e-14 or abs(3 * g - 1) < 1e-14):
        raise ValueError("gamma must not be 0 or 1/3")
    z = Fraction(0) if isinstance(g, Fraction) else 0.0
    c2 = (3 * g - 1) / (6 * g)
    a31 = -(6 * g**3 - 3 * g**2 + 1) / (2 * (3 * g - 1))
    a32 = g * (3 * g**2 + 1) / (3 * g - 1)
    b = [z, 3 * g**2 / (3 * g**2 + 1), 1 / (3 * g**2 + 1)]
    A_ex = [[z, z, z], [c2, z, z], [a31, a32, z]]
    A_im = [[z, z, z], [z, c2, z], [z, g, (1 - g) / 2]]
    return _tableau_from_fractions(A_ex, A_im, b, b, name=f"TVD3_FAMILY({float(g):.6g})")


def _imex1():
    return ImexTableau([[0.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [0.0, 1.0]],
                       [1.0, 0.0], [0.0, 1.0], name="IMEX1")


def _imex1_4():
    # Four forward/backward Euler substeps of size dt/4 in CK form.
    s = 5
    A_ex = np.zeros((s, s))
    A_im = np.zeros((s, s))
    for k in range(1, s):
        A_ex[k, :k] = 0.25
        A_im[k, 1:k + 1] = 0.25
    return ImexTableau(A_ex, A_im, A_ex[-1], A_im[-1], name="IMEX1_4")


def _tvd3_4():
    A_ex = [
        [0, 0, 0, 0],
        [0.2049503677289891, 0, 0, 0],
        [0.2123925641886599, 0.2049201701400305, 0, 0],
        [-0.4501877125339555, 0.3955748607480934, 0.9594331543518283, 0],
    ]
    A_im = [
        [0, 0, 0, 0],
        [0, 0.2049503677289891, 0, 0],
        [0, 0.2040104873103189, 0.2133022470183705, 0],
        [0, 0.3991926529002874, 0.4115004113464103, 0.0941272383192684],
    ]
    b = [0, 0.3354718384287510, 0.3487815573407456, 0.3157466042305059]
    c = [0, 0.2049503677289891, 0.4173127343286904, 0.9048203025659662]
    return ImexTableau(A_ex, A_im, b, b, c, c, name="TVD3_4")


def _ars233():
    d = (3.0 + np.sqrt(3.0)) / 6.0
    A_ex = [[0, 0, 0], [d, 0, 0], [d - 1, 2 - 2 * d, 0]]
    A_im = [[0, 0, 0], [0, d, 0], [0, 1 - 2 * d, d]]
    b = [0, 0.5, 0.5]
    return ImexTableau(A_ex, A_im, b, b, name="ARS233")


# Printed convex-combination parameters that travel with the named schemes.
TVD3_4_THETA = (1.0, 1.0, 1.0, 0.5110907014643069, 0.4997722865197203)
TVD3_4_LAMBDA = 0.5471076190680170
TVD3_THETA = (Fraction(1), Fraction(1), Fraction(3, 8), Fraction(7, 48))
TVD3_LAMBDA = Fraction(32, 37)

_BUILDERS = {
    "IMEX1": _imex1,
    "IMEX1_4": _imex1_4,
    "TVD3_4": _tvd3_4,
    "ARS233": _ars233,
    "ARS223": _ars233,
}

BUILTIN_NAMES = ("IMEX1", "IMEX1_4", "TVD3_FAMILY(gamma)", "TVD3", "TVD3_4", "ARS233", "ARS223")


def builtin(name: str, gamma=None) -> ImexTableau:
    """Return a named tableau.

    Recognised names: ``IMEX1``, ``IMEX1_4``, ``TVD3_4``, ``ARS233`` (alias
    ``ARS223``), ``TVD3`` (the family at gamma = 2/3) and
    ``TVD3_FAMILY(<gamma>)`` or ``TVD3_FAMILY`` with the ``gamma`` keyword.
    """
    key = name.strip().upper()
    norm = key.replace("(", "").replace(")", "").replace(",", "").replace(" ", "")
    if norm in ("TVD34", "TVD3_4", "IMEX34", "IMEX3_4"):
        return _tvd3_4()
    if norm in ("ARS233", "ARS223"):
        return _ars233()
    if norm in ("IMEX1_4", "IMEX14"):
        return _imex1_4()
    if norm in ("TVD3", "IMEX3"):
        return build_tvd3_family(Fraction(2, 3))
    if key.startswith("TVD3_FAMILY"):
        rest = key[len("TVD3_FAMILY"):].strip("() ")
        if rest:
            gamma = Fraction(rest) if "/" in rest else float(rest)
        if gamma is None:
            raise ValueError("TVD3_FAMILY requires a gamma value")
        return build_tvd3_family(gamma)
    if key in _BUILDERS:
        return _BUILDERS[key]()
    raise KeyError(f"unknown scheme id {name!r}")
