"""Isentropic Euler equations in 2D with Mach-scaled pressure.

The state is stacked as ``U[0] = rho``, ``U[1] = rho*u_x``, ``U[2] = rho*u_y``
on an ``Nx x Ny`` Cartesian grid, index ``U[:, i, j]`` for cell centre
``(x_i, y_j)``.  The flux is split into the convective part ``(0, rho u(x)u)``
(explicit) and the acoustic part ``(rho u, p(rho)/M^2 I)`` (implicit).

Two space discretisations are provided:

``rs``
    The pressure is linearised about a constant reference density.  The
    linear acoustic part is implicit with fourth-order central differences,
    the convective part and the pressure remainder are explicit.  Each stage
    reduces to one Helmholtz problem for the density.
``upwind``
    Same linearisation, but the implicit acoustic flux carries Rusanov
    dissipation with speed ``c_ref/M`` and the explicit part uses limited
    interface values with a Rusanov flux.  Diffusive at low Mach number,
    used as the MOOD parachute.
"""
from __future__ import annotations

import csv
import io
import math
import struct
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .advection import _koren_half_slope
from .mood import MoodHierarchy, integrate, run as mood_run
from .stepper import SPEED_FLOOR, SemiDiscreteProblem, TimeScheme
from .tableaux import TVD3_4_LAMBDA, TVD3_4_THETA, builtin

__all__ = [
    "EulerParams",
    "Grid2D",
    "EulerState2D",
    "flux_split",
    "RSImexDiscretization",
    "UpwindTVDDiscretization",
    "rs_imex_operators",
    "upwind_tvd_operators",
    "riemann_invariant_detector",
    "CASES",
    "init_case",
    "vorticity",
    "EULER_SCHEMES",
    "EulerRun",
    "run_euler",
    "euler_dt",
    "write_csv",
    "write_binary",
    "read_binary",
    "XI",
    "SOLVER_RTOL",
    "DIRECT_MAX",
]

XI = 0.01
SOLVER_RTOL = 1e-10
DIRECT_MAX = 128 * 128
_CACHE_SIZE = 32


@dataclass(frozen=True)
class EulerParams:
    """Mach number and gas law ``p = rho**gamma``."""

    M: float = 1.0
    gamma: float = 1.4

    def __post_init__(self):
        if not self.M > 0:
            raise ValueError("M must be positive")
        if not self.gamma >= 1:
            raise ValueError("gamma must be >= 1")

    def pressure(self, rho):
        return np.power(rho, self.gamma)

    def sound_speed(self, rho):
        return np.sqrt(self.gamma * np.power(rho, self.gamma - 1.0))

    def kappa(self, rho_ref):
        """``c_ref**2 = p'(rho_ref)``."""
        return self.gamma * rho_ref ** (self.gamma - 1.0)

    def wave_speeds(self, rho, un):
        """``(u.n - c/M, u.n, u.n + c/M)``."""
        c = self.sound_speed(rho) / self.M
        return un - c, un, un + c


@dataclass(frozen=True)
class Grid2D:
    """Uniform cell-centred grid on ``[x0, x1] x [y0, y1]``."""

    Nx: int
    Ny: int
    x0: float = 0.0
    x1: float = 1.0
    y0: float = 0.0
    y1: float = 1.0
    bc: str = "periodic"

    def __post_init__(self):
        if self.bc not in ("periodic", "neumann"):
            raise ValueError("bc must be 'periodic' or 'neumann'")
        if self.Nx < 3 or self.Ny < 3:
            raise ValueError("need at least 3 cells per direction")

    @property
    def dx(self):
        return (self.x1 - self.x0) / self.Nx

    @property
    def dy(self):
        return (self.y1 - self.y0) / self.Ny

    @property
    def h(self):
        return (self.dx, self.dy)

    @property
    def cell_area(self):
        return self.dx * self.dy

    @property
    def area(self):
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def x(self):
        return self.x0 + (np.arange(self.Nx) + 0.5) * self.dx

    @property
    def y(self):
        return self.y0 + (np.arange(self.Ny) + 0.5) * self.dy

    def mesh(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    @property
    def shape(self):
        return (self.Nx, self.Ny)

    def index(self, n, k):
        """Indices of the neighbour ``k`` cells away along a line of ``n`` cells."""
        i = np.arange(n) + k
        return i % n if self.bc == "periodic" else np.clip(i, 0, n - 1)


@dataclass
class EulerState2D:
    """Density and momentum fields with their cell sizes."""

    rho: np.ndarray
    mom: np.ndarray
    dx: float
    dy: float

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        self.mom = np.asarray(self.mom, dtype=float)
        if self.mom.shape != self.rho.shape + (2,):
            raise ValueError("mom must have shape rho.shape + (2,)")
        if not np.all(np.isfinite(self.rho)) or not np.all(np.isfinite(self.mom)):
            raise ValueError("non-finite state")
        if np.any(self.rho <= 0):
            raise ValueError("density must be positive")

    @property
    def velocity(self):
        return self.mom / self.rho[..., None]

    def stacked(self):
        return np.stack([self.rho, self.mom[..., 0], self.mom[..., 1]])

    @classmethod
    def from_stacked(cls, U, grid: Grid2D):
        return cls(U[0], np.moveaxis(U[1:], 0, -1), grid.dx, grid.dy)


def flux_split(U, params: EulerParams):
    """Explicit and implicit physical fluxes in both directions.

    Returns ``(fe_x, fe_y, fi_x, fi_y)``, each stacked like ``U``.
    """
    rho, mx, my = U
    ux, uy = mx / rho, my / rho
    p = params.pressure(rho) / params.M**2
    z = np.zeros_like(rho)
    fe_x = np.stack([z, mx * ux, my * ux])
    fe_y = np.stack([z, mx * uy, my * uy])
    fi_x = np.stack([mx, p, z])
    fi_y = np.stack([my, z, p])
    return fe_x, fe_y, fi_x, fi_y


# ---------------------------------------------------------------------------
# stencil helpers

class _Stencil:
    """Shifted views and sparse difference matrices on a grid."""

    def __init__(self, grid: Grid2D):
        self.grid = grid
        self._idx = {}

    def idx(self, axis, k):
        key = (axis, k)
        if key not in self._idx:
            n = self.grid.Nx if axis == 0 else self.grid.Ny
            self._idx[key] = self.grid.index(n, k)
        return self._idx[key]

    def sh(self, q, k, axis):
        """``out[..., i, ...] = q[..., i+k, ...]`` along spatial ``axis``."""
        return np.take(q, self.idx(axis, k), axis=q.ndim - 2 + axis)

    def d2(self, q, axis):
        h = self.grid.h[axis]
        return (self.sh(q, 1, axis) - self.sh(q, -1, axis)) / (2.0 * h)

    def d4(self, q, axis):
        h = self.grid.h[axis]
        s = self.sh
        return (8.0 * (s(q, 1, axis) - s(q, -1, axis))
                - (s(q, 2, axis) - s(q, -2, axis))) / (12.0 * h)

    def matrix(self, axis, coeffs):
        """Sparse ``Nx*Ny`` matrix of ``sum_k coeffs[k] * q[i+k]`` along ``axis``."""
        n = self.grid.Nx if axis == 0 else self.grid.Ny
        rows, cols, vals = [], [], []
        for k, c in coeffs.items():
            rows.append(np.arange(n))
            cols.append(self.grid.index(n, k))
            vals.append(np.full(n, float(c)))
        m1 = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                           shape=(n, n)).tocsr()
        if axis == 0:
            return sp.kron(m1, sp.identity(self.grid.Ny), format="csr")
        return sp.kron(sp.identity(self.grid.Nx), m1, format="csr")

    def D4(self, axis):
        h = self.grid.h[axis]
        return self.matrix(axis, {1: 8 / (12 * h), -1: -8 / (12 * h),
                                  2: -1 / (12 * h), -2: 1 / (12 * h)})

    def D2(self, axis):
        h = self.grid.h[axis]
        return self.matrix(axis, {1: 1 / (2 * h), -1: -1 / (2 * h)})

    def Lap(self, axis):
        h = self.grid.h[axis]
        return self.matrix(axis, {1: 1 / h, 0: -2 / h, -1: 1 / h})


class _FactorCache:
    """Small LRU of factorised matrices keyed by the stage coefficient."""

    def __init__(self, build, symmetric):
        self.build = build
        self.symmetric = symmetric
        self._store = OrderedDict()

    def solve(self, nu, rhs):
        key = float(nu)
        if key in self._store:
            self._store.move_to_end(key)
            kind, obj = self._store[key]
        else:
            A = self.build(nu).tocsc()
            if A.shape[0] <= self.direct_max:
                kind, obj = "lu", spla.splu(A)
            else:
                kind, obj = "it", A
            self._store[key] = (kind, obj)
            if len(self._store) > _CACHE_SIZE:
                self._store.popitem(last=False)
        if kind == "lu":
            x = obj.solve(rhs)
        else:
            method = spla.cg if self.symmetric else spla.gmres
            x, info = method(obj, rhs, rtol=SOLVER_RTOL, atol=0.0, maxiter=10_000)
            if info != 0:
                raise FloatingPointError(f"linear solver did not converge (info={info})")
        return x

    direct_max = DIRECT_MAX


class _Discretization:
    """Common plumbing: reference density and the semi-discrete problem."""

    name = "base"

    def __init__(self, grid: Grid2D, params: EulerParams, rho_ref: float):
        if not rho_ref > 0:
            raise ValueError("rho_ref must be positive")
        self.grid, self.params, self.rho_ref = grid, params, float(rho_ref)
        self.kappa = params.kappa(self.rho_ref)
        self.st = _Stencil(grid)

    def pressure_remainder(self, rho):
        """``(p(rho) - c_ref^2 rho)/M^2``."""
        return (self.params.pressure(rho) - self.kappa * rho) / self.params.M**2

    def problem(self):
        return SemiDiscreteProblem(self.explicit_op, self.implicit_op, self.implicit_solve,
                                   name=f"euler[{self.name}]")

    def operators(self):
        return self.explicit_op, self.implicit_op, self.implicit_solve


def _check_density(rho):
    if not np.all(rho > 0):
        raise ValueError("non-positive density")


class RSImexDiscretization(_Discretization):
    """Reference-state linearisation, central implicit part.

    Explicit tendency: flux-split third-order upwind-biased differences of
    ``rho u(x)u`` with local Lax-Friedrichs speed ``2|u.n|`` plus fourth-order
    central differences of the pressure remainder.  Implicit tendency:
    fourth-order central differences of ``(rho u, c_ref^2/M^2 rho)``.
    """

    name = "rs"

    def __init__(self, grid, params, rho_ref):
        super().__init__(grid, params, rho_ref)
        st = self.st
        self._Dx, self._Dy = st.D4(0), st.D4(1)
        self._L = self._Dx @ self._Dx + self._Dy @ self._Dy
        n = grid.Nx * grid.Ny
        k = self.kappa / params.M**2
        symmetric = grid.bc == "periodic"
        self._cache = _FactorCache(lambda nu: sp.identity(n) - (nu * nu * k) * self._L,
                                   symmetric)
        self._symbol = None
        if symmetric:
            # -D4 D4 in Fourier space: sum over axes of ((8 sin t - sin 2t)/(6h))^2
            tx = 2 * np.pi * np.fft.fftfreq(grid.Nx)[:, None]
            ty = 2 * np.pi * np.fft.rfftfreq(grid.Ny)[None, :]
            sx = (8 * np.sin(tx) - np.sin(2 * tx)) / (6 * grid.dx)
            sy = (8 * np.sin(ty) - np.sin(2 * ty)) / (6 * grid.dy)
            self._symbol = sx**2 + sy**2

    def _convective(self, U, axis):
        st = self.st
        rho = U[0]
        _check_density(rho)
        un = U[1 + axis] / rho
        F = U[1:] * un                     # momentum fluxes m_k u_n
        a = 2.0 * np.abs(un)
        alpha = np.maximum.reduce([st.sh(a, k, axis) for k in (-1, 0, 1, 2)])
        q = U[1:]
        fp = [st.sh(F, k, axis) for k in (-1, 0, 1, 2)]
        qp = [st.sh(q, k, axis) for k in (-1, 0, 1, 2)]
        # F+ reconstructed from i-1, i, i+1 and F- from i, i+1, i+2
        plus = (-(fp[0] + alpha * qp[0]) + 5.0 * (fp[1] + alpha * qp[1])
                + 2.0 * (fp[2] + alpha * qp[2])) / 12.0
        minus = (2.0 * (fp[1] - alpha * qp[1]) + 5.0 * (fp[2] - alpha * qp[2])
                 - (fp[3] - alpha * qp[3])) / 12.0
        Fhat = plus + minus               # flux at i+1/2
        return -(Fhat - st.sh(Fhat, -1, axis)) / self.grid.h[axis]

    def explicit_op(self, U, t=0.0):
        out = np.zeros_like(U)
        pi = self.pressure_remainder(U[0])
        for axis in (0, 1):
            out[1:] += self._convective(U, axis)
            out[1 + axis] -= self.st.d4(pi, axis)
        return out

    def implicit_op(self, U, t=0.0):
        k = self.kappa / self.params.M**2
        st = self.st
        out = np.empty_like(U)
        out[0] = -(st.d4(U[1], 0) + st.d4(U[2], 1))
        out[1] = -k * st.d4(U[0], 0)
        out[2] = -k * st.d4(U[0], 1)
        return out

    def implicit_solve(self, nu, R, t=0.0):
        """Solve ``X - nu*implicit_op(X) = R`` through the density Helmholtz problem."""
        if nu == 0.0:
            return R.copy()
        k = self.kappa / self.params.M**2
        st = self.st
        rhs = R[0] - nu * (st.d4(R[1], 0) + st.d4(R[2], 1))
        if self._symbol is not None:
            # periodic grid: the Helmholtz operator is diagonal in Fourier space
            rho = np.fft.irfft2(np.fft.rfft2(rhs) / (1.0 + nu * nu * k * self._symbol),
                                s=self.grid.shape)
        else:
            rho = self._cache.solve(nu, rhs.ravel()).reshape(self.grid.shape)
        out = np.empty_like(R)
        out[0] = rho
        out[1] = R[1] - nu * k * st.d4(rho, 0)
        out[2] = R[2] - nu * k * st.d4(rho, 1)
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("non-finite implicit solution")
        return out

    def helmholtz_matrix(self, nu):
        n = self.grid.Nx * self.grid.Ny
        return sp.identity(n) - nu * nu * (self.kappa / self.params.M**2) * self._L


class UpwindTVDDiscretization(_Discretization):
    """Upwind stand-in with Mach-dependent implicit viscosity.

    Implicit tendency: central differences of the linear acoustic flux plus
    Rusanov dissipation with speed ``c_ref/M`` on every component.  Explicit
    tendency: Rusanov flux with speed ``2|u.n|`` of ``(0, rho u(x)u + pi I)``
    evaluated on limited (``recon="limited"``) or cell (``recon="first"``)
    interface values.
    """

    name = "upwind"

    def __init__(self, grid, params, rho_ref, recon="limited"):
        super().__init__(grid, params, rho_ref)
        if recon not in ("limited", "first"):
            raise ValueError("recon must be 'limited' or 'first'")
        self.recon = recon
        self.viscosity_speed = self.kappa ** 0.5 / params.M
        self._L = self._assemble()
        n3 = 3 * grid.Nx * grid.Ny
        self._cache = _FactorCache(lambda nu: sp.identity(n3) - nu * self._L, False)

    def _assemble(self):
        st = self.st
        k = self.kappa / self.params.M**2
        s = self.viscosity_speed
        Dx, Dy = st.D2(0), st.D2(1)
        V = 0.5 * s * (st.Lap(0) + st.Lap(1))
        return sp.bmat([[V, -Dx, -Dy],
                        [-k * Dx, V, None],
                        [-k * Dy, None, V]], format="csr")

    def dissipation(self, U):
        """Rusanov part of the implicit tendency (for diagnostics)."""
        st = self.st
        s = self.viscosity_speed
        out = np.zeros_like(U)
        for axis in (0, 1):
            h = self.grid.h[axis]
            out += 0.5 * s * (st.sh(U, 1, axis) - 2.0 * U + st.sh(U, -1, axis)) / h
        return out

    def implicit_op(self, U, t=0.0):
        st = self.st
        k = self.kappa / self.params.M**2
        out = self.dissipation(U)
        out[0] -= st.d2(U[1], 0) + st.d2(U[2], 1)
        out[1] -= k * st.d2(U[0], 0)
        out[2] -= k * st.d2(U[0], 1)
        return out

    def implicit_solve(self, nu, R, t=0.0):
        if nu == 0.0:
            return R.copy()
        x = self._cache.solve(nu, R.ravel()).reshape(R.shape)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError("non-finite implicit solution")
        return x

    def _flux(self, Q, axis):
        rho = Q[0]
        un = Q[1 + axis] / rho
        F = np.zeros_like(Q)
        F[1:] = Q[1:] * un
        F[1 + axis] += self.pressure_remainder(rho)
        return F, un

    def explicit_op(self, U, t=0.0):
        st = self.st
        _check_density(U[0])
        out = np.zeros_like(U)
        for axis in (0, 1):
            if self.recon == "limited":
                dl = U - st.sh(U, -1, axis)
                dr = st.sh(U, 1, axis) - U
                qL = U + _koren_half_slope(dl, dr)
                qR = st.sh(U - _koren_half_slope(dr, dl), 1, axis)
            else:
                qL, qR = U, st.sh(U, 1, axis)
            FL, uL = self._flux(qL, axis)
            FR, uR = self._flux(qR, axis)
            a = 2.0 * np.maximum(np.abs(uL), np.abs(uR))
            Fhat = 0.5 * (FL + FR) - 0.5 * a * (qR - qL)
            out -= (Fhat - st.sh(Fhat, -1, axis)) / self.grid.h[axis]
        return out


def rs_imex_operators(grid: Grid2D, params: EulerParams, rho_ref: float):
    """``(explicit_op, implicit_op, implicit_solve)`` of the reference-state scheme."""
    return RSImexDiscretization(grid, params, rho_ref).operators()


def upwind_tvd_operators(grid: Grid2D, params: EulerParams, rho_ref: float,
                         recon="limited"):
    """``(explicit_op, implicit_op, implicit_solve)`` of the upwind scheme."""
    return UpwindTVDDiscretization(grid, params, rho_ref, recon).operators()


def riemann_invariant_detector(U, params: EulerParams):
    """Cellwise ``max over n in {x, y}`` of ``max(Phi_-, Phi_+)``.

    ``Phi_(+/-) = u.n -/+ (2/(gamma-1)) c / M`` with ``c = sqrt(gamma rho^(gamma-1))``,
    so the maximum is ``max(u_x, u_y) + (2/(gamma-1)) c/M``.
    """
    rho = U[0]
    if np.any(~(rho > 0)):
        raise ValueError("detector needs positive density")
    if params.gamma == 1.0:
        raise ValueError("the detector needs gamma > 1")
    acoustic = 2.0 / (params.gamma - 1.0) * params.sound_speed(rho) / params.M
    un = np.maximum(U[1] / rho, U[2] / rho)
    return un + acoustic


# ---------------------------------------------------------------------------
# test cases

CASES = ("acoustic_rp", "shear_wave", "explosion", "double_shear", "vortex")
DEFAULT_N = {"acoustic_rp": (100, 3), "shear_wave": (100, 3), "explosion": (100, 100),
             "double_shear": (25, 25), "vortex": (64, 64)}
VORTEX_A = 8.0


def _final_time(name, M):
    return {"acoustic_rp": 0.3 * M, "shear_wave": 0.25 * M, "explosion": 0.125,
            "double_shear": 10.0, "vortex": 0.2}[name]


def init_case(name: str, params: EulerParams, N=None):
    """Grid, initial state (stacked) and default final time of a named case.

    Parameters
    ----------
    name : str
        One of :data:`CASES`.
    N : int or (int, int), optional
        Cells per direction; defaults to the standard resolution of the case.
    """
    if name not in CASES:
        raise KeyError(f"unknown case {name!r}; choose from {CASES}")
    if N is None:
        N = DEFAULT_N[name]
    Nx, Ny = (N, N) if np.isscalar(N) else N
    M, g = params.M, params.gamma
    if name in ("acoustic_rp", "shear_wave"):
        grid = Grid2D(Nx, Ny, 0.0, 2.0, 0.0, 1.0, "neumann")
        X, Y = grid.mesh()
        left = X < 1.0
        rho = np.where(left, 1.0 + M**2, 1.0)
        ux = np.zeros_like(rho)
        uy = np.where(left, 1.0 + M, 1.0) if name == "shear_wave" else np.zeros_like(rho)
    elif name == "explosion":
        grid = Grid2D(Nx, Ny, -0.5, 0.5, -0.5, 0.5, "periodic")
        X, Y = grid.mesh()
        rho = np.where(np.hypot(X, Y) < 0.2, 2.0, 1.0)
        ux = uy = np.zeros_like(rho)
    elif name == "double_shear":
        grid = Grid2D(Nx, Ny, 0.0, 2 * np.pi, 0.0, 2 * np.pi, "periodic")
        X, Y = grid.mesh()
        width = np.pi / 15.0
        rho = np.full_like(X, np.pi / 15.0)
        ux = np.where(Y <= np.pi, np.tanh((Y - np.pi / 2) / width),
                      np.tanh((1.5 * np.pi - Y) / width))
        uy = 0.05 * np.sin(X)
    else:
        grid = Grid2D(Nx, Ny, 0.0, 1.0, 0.0, 1.0, "periodic")
        X, Y = grid.mesh()
        a = VORTEX_A
        xr, yr = X - 0.5, Y - 0.5
        r2 = xr**2 + yr**2
        rho = 1.0 - M**2 / 8.0 * np.exp(-2.0 * a * a * r2)
        amp = a * np.sqrt(g / 2.0) * np.exp(-a * a * r2) * rho ** (g / 2.0 - 1.0)
        ux, uy = amp * yr, -amp * xr
    U = np.stack([rho, rho * ux, rho * uy])
    return grid, U, _final_time(name, M)


def vorticity(U, grid: Grid2D):
    """``d u_y/dx - d u_x/dy`` with second-order central differences."""
    st = _Stencil(grid)
    ux, uy = U[1] / U[0], U[2] / U[0]
    return st.d2(uy, 0) - st.d2(ux, 1)


# ---------------------------------------------------------------------------
# schemes and runner

def _tvd34():
    return TimeScheme(builtin("TVD3_4"), TVD3_4_THETA, TVD3_4_LAMBDA, "TVD3_4")


_LEVELS = {
    # name: (time scheme factory, discretisation, explicit reconstruction)
    "IMEX1": (lambda: TimeScheme(builtin("IMEX1"), name="IMEX1"), "upwind", "first"),
    "IMEX3_4": (lambda: TimeScheme(builtin("TVD3_4"), name="IMEX3_4"), "rs", None),
    "ARS233": (lambda: TimeScheme(builtin("ARS233"), name="ARS233"), "rs", None),
    "TVD3_4_RS": (_tvd34, "rs", None),
    "TVD3_4": (_tvd34, "upwind", "limited"),
}
EULER_SCHEMES = {
    "IMEX1": ("IMEX1",),
    "IMEX3_4": ("IMEX3_4",),
    "ARS233": ("ARS233",),
    "TVD3_4_RS": ("TVD3_4_RS",),
    "TVD3_4": ("TVD3_4",),
    "MOOD3_4": ("IMEX3_4", "TVD3_4_RS", "TVD3_4"),
    "ARS_MOOD": ("ARS233", "TVD3_4"),
}


def _normalise_scheme(name):
    key = name.upper().replace("(", "_").replace(")", "").replace("-", "_")
    key = {"TVD34": "TVD3_4", "IMEX34": "IMEX3_4", "MOOD34": "MOOD3_4",
           "ARSMOOD": "ARS_MOOD"}.get(key, key)
    if key not in EULER_SCHEMES:
        raise KeyError(f"unknown Euler scheme {name!r}; choose from {tuple(EULER_SCHEMES)}")
    return key


def euler_dt(U, grid: Grid2D, params: EulerParams, mode="material", nu=0.5):
    """Time step from the material (``2 max|u.n|``) or acoustic CFL rule."""
    rho = U[0]
    ux, uy = np.abs(U[1] / rho), np.abs(U[2] / rho)
    if mode == "material":
        rate = max(2.0 * np.max(ux) / grid.dx, 2.0 * np.max(uy) / grid.dy)
    elif mode == "acoustic":
        c = params.sound_speed(rho) / params.M
        rate = max(np.max(ux + c) / grid.dx, np.max(uy + c) / grid.dy)
    else:
        raise ValueError(f"unknown CFL mode {mode!r}")
    return nu / max(rate, SPEED_FLOOR)


@dataclass
class EulerRun:
    """Result of :func:`run_euler`."""

    case: str
    scheme: str
    grid: Grid2D
    params: EulerParams
    U0: np.ndarray
    U: np.ndarray
    t: float
    times: list = field(default_factory=list)
    stats: object = None

    @property
    def steps(self):
        return len(self.times)

    @property
    def state(self):
        return EulerState2D.from_stacked(self.U, self.grid)


def run_euler(case: str, scheme: str, M: float = 1.0, *, N=None, gamma=1.4,
              t_final=None, cfl_mode="material", nu=None, dt=None, n_steps=None,
              freeze_dt=None, xi=XI, observer=None):
    """Integrate a named case with a single scheme or a MOOD cascade.

    Parameters
    ----------
    case : str
        One of :data:`CASES`.
    scheme : str
        Key of :data:`EULER_SCHEMES`.
    cfl_mode : {"material", "acoustic"}
    nu : float, optional
        CFL number; defaults to 0.1 for the smooth cases and 0.5 otherwise.
    dt, n_steps : optional
        Fixed step size, or a fixed number of equal steps.
    freeze_dt : bool, optional
        Use equal steps sized by the CFL bound of the initial state; on by
        default for the stationary vortex.
    xi : float
        Threshold relaxation of the time-dependent detector.
    """
    params = EulerParams(M, gamma)
    grid, U0, tf = init_case(case, params, N)
    if t_final is not None:
        tf = t_final
    rho_ref = float(np.mean(U0[0]))
    key = _normalise_scheme(scheme)
    if nu is None:
        nu = 0.1 if case in ("vortex", "double_shear", "shear_wave") else 0.5
    discs = {}

    def stepper(level):
        make, disc, recon = _LEVELS[level]
        dkey = (disc, recon)
        if dkey not in discs:
            discs[dkey] = (RSImexDiscretization(grid, params, rho_ref) if disc == "rs"
                           else UpwindTVDDiscretization(grid, params, rho_ref, recon))
        prob = discs[dkey].problem()
        ts = make()
        return lambda w, h, t: ts.step(prob, w, h, t)

    if n_steps is not None:
        dt = tf / n_steps
    if dt is None and freeze_dt is None:
        freeze_dt = case == "vortex"
    if dt is None and freeze_dt:
        # equal steps from the initial CFL bound keep the factorisations cached
        n = max(1, math.ceil(tf / euler_dt(U0, grid, params, cfl_mode, nu) - 1e-12))
        dt = tf / n
    if dt is not None:
        dt_fn = lambda w, t, rem: dt  # noqa: E731
    else:
        dt_fn = lambda w, t, rem: euler_dt(w, grid, params, cfl_mode, nu)  # noqa: E731

    rec = EulerRun(case, key, grid, params, U0, U0, 0.0)

    def obs(n, t, w):
        rec.times.append(t)
        if observer is not None:
            observer(n, t, w)

    levels = EULER_SCHEMES[key]
    if len(levels) == 1:
        U, t = integrate(stepper(levels[0]), U0, tf, dt_fn, obs)
    else:
        h = MoodHierarchy([stepper(lv) for lv in levels],
                          lambda w: riemann_invariant_detector(w, params),
                          xi=xi, time_dependent=True, names=list(levels))
        U, rec.stats = mood_run(h, U0, tf, dt_fn, obs)
        t = rec.times[-1] if rec.times else 0.0
    rec.U, rec.t = U, t
    return rec


# ---------------------------------------------------------------------------
# snapshots

def write_csv(U, grid: Grid2D, path=None, digits=12):
    """Cellwise ``x, y, rho, mom_x, mom_y, omega`` rows."""
    X, Y = grid.mesh()
    om = vorticity(U, grid)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["x", "y", "rho", "mom_x", "mom_y", "omega"])
    cols = [X, Y, U[0], U[1], U[2], om]
    for vals in zip(*(c.ravel() for c in cols)):
        wr.writerow([f"{v:.{digits}g}" for v in vals])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


_HEADER = struct.Struct("<8d")


def write_binary(U, grid: Grid2D, params: EulerParams, t, case, path):
    """Header ``Nx, Ny, dx, dy, t, M, gamma, case_id`` then ``rho, mom_x, mom_y``.

    All values are little-endian float64, fields row-major.
    """
    cid = CASES.index(case) if isinstance(case, str) else int(case)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(grid.Nx, grid.Ny, grid.dx, grid.dy, t, params.M,
                              params.gamma, cid))
        fh.write(np.ascontiguousarray(U, dtype="<f8").tobytes())


def read_binary(path):
    """Inverse of :func:`write_binary`: ``(header dict, U)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    vals = _HEADER.unpack_from(raw)
    Nx, Ny = int(vals[0]), int(vals[1])
    head = dict(Nx=Nx, Ny=Ny, dx=vals[2], dy=vals[3], t=vals[4], M=vals[5], gamma=vals[6],
                case=CASES[int(vals[7])])
    U = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(3, Nx, Ny).copy()
    if not math.isfinite(U.sum()):
        raise ValueError("corrupt snapshot")
    return head, U
