"""Isometric bending of a ruled quadric patch, and the seed models built on it.

The z=0 patch is rewritten in ruled form x0(u, v) = c(v) + t(u, v) w_hat(v)
with w_hat the unit u-family ruling direction, c the directrix along a
reference u-line and t the signed arclength along the ruling (a closed form
of (u, v)).  A bending keeps the ruled structure and the induced metric:

  * the spherical image w_tilde keeps its speed s(v) = |w_hat'| but gets a
    new geodesic curvature kappa_tilde(v), integrated as a Darboux frame ODE
    on the unit sphere;
  * the directrix derivative keeps its components in the moving frame
    (p, q, sigma r), so |c'|, c'.w and c'.w' are preserved and the first
    fundamental form matches the base patch identically in u.

The frame is integrated with fixed-step RK4 plus re-orthonormalization and
stored densely with cubic Hermite interpolation, so bent jets are available
at arbitrary parameters (the transport integrator needs them between grid
nodes).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import confocal as cf
from .errors import QuadratureError, ValidityError
from .rolling import Grid2D, SurfacePatch

VALIDITY_FLOOR = 1e-6


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def _unit(a):
    return a / np.linalg.norm(a, axis=-1, keepdims=True)


class RulingProfile:
    """Closed-form data of the base ruled structure, as functions of v."""

    def __init__(self, family: cf.ConfocalFamily, u_ref: float):
        self.family = family
        self.u_ref = float(u_ref)

    def ruling_raw(self, v):
        """Unnormalized ruling w(v) = B x_{0,u} with first two derivatives."""
        fam = self.family
        alpha, beta, gamma = fam.level_constants(0.0)
        v = np.asarray(v, float)
        o = np.ones_like(v)
        if fam.kind == cf.HYPERBOLOID:
            w = np.stack([alpha * (v * v - 1.0), -beta * (v * v + 1.0), -2.0 * gamma * v], -1)
            w1 = np.stack([2.0 * alpha * v, -2.0 * beta * v, -2.0 * gamma * o], -1)
            w2 = np.stack([2.0 * alpha * o, -2.0 * beta * o, 0.0 * o], -1)
        else:
            w = np.stack([alpha * o, beta * o, 2.0 * v], -1)
            w1 = np.stack([0.0 * o, 0.0 * o, 2.0 * o], -1)
            w2 = np.zeros_like(w)
        return w, w1, w2

    def frame_data(self, v) -> dict:
        """Unit ruling, spherical speed/curvature, directrix components.

        Everything needed for the frame ODE and the bent second partials:
        w_hat, s, s', kappa, base frame (n, b), components (p, q, r) of c'
        and their derivatives.
        """
        w, w1, w2 = self.ruling_raw(v)
        rho = np.linalg.norm(w, axis=-1, keepdims=True)
        rho1 = _dot(w, w1)[..., None] / rho
        rho2 = (_dot(w1, w1) + _dot(w, w2))[..., None] / rho - rho1 ** 2 / rho
        what = w / rho
        what1 = w1 / rho - w * rho1 / rho ** 2
        what2 = (w2 / rho - 2.0 * w1 * rho1 / rho ** 2
                 + 2.0 * w * rho1 ** 2 / rho ** 3 - w * rho2 / rho ** 2)
        s = np.linalg.norm(what1, axis=-1)
        s1 = _dot(what1, what2) / s
        kappa = _dot(np.cross(what, what1), what2) / s ** 3
        n = what1 / s[..., None]
        b = np.cross(what, n)
        j = cf.evaluate(self.family, 0.0, self.u_ref, np.asarray(v, float))
        c, c1, c2 = j.x, j.x_v, j.x_vv
        n1 = s[..., None] * (kappa[..., None] * b - what)
        b1 = -(s * kappa)[..., None] * n
        p = _dot(c1, what)
        q = _dot(c1, n)
        r = _dot(c1, b)
        p1 = _dot(c2, what) + _dot(c1, what1)
        q1 = _dot(c2, n) + _dot(c1, n1)
        r1 = _dot(c2, b) + _dot(c1, b1)
        return dict(w=w, rho=rho[..., 0], rho1=rho1[..., 0], rho2=rho2[..., 0],
                    what=what, s=s, s1=s1, kappa=kappa, n=n, b=b,
                    c=c, c1=c1, p=p, q=q, r=r, p1=p1, q1=q1, r1=r1)

    def t_data(self, u, v):
        """Ruling arclength t(u, v) from the reference line, with partials."""
        u = np.asarray(u, float)
        v = np.asarray(v, float)
        w, w1, w2 = self.ruling_raw(v)
        rho = np.linalg.norm(w, axis=-1)
        rho1 = _dot(w, w1) / rho
        rho2 = (_dot(w1, w1) + _dot(w, w2)) / rho - rho1 ** 2 / rho
        if self.family.kind == cf.HYPERBOLOID:
            dr = self.u_ref - v
            d = u - v
            if np.any(dr * d <= 0.0):
                raise ValidityError("grid and u_ref must sit on one side of u = v")
            g = 1.0 / dr - 1.0 / d
            g_u = 1.0 / d ** 2
            g_v = 1.0 / dr ** 2 - 1.0 / d ** 2
            g_uu = -2.0 / d ** 3
            g_uv = 2.0 / d ** 3
            g_vv = 2.0 / dr ** 3 - 2.0 / d ** 3
            return dict(t=rho * g, t_u=rho * g_u, t_v=rho1 * g + rho * g_v,
                        t_uu=rho * g_uu, t_uv=rho1 * g_u + rho * g_uv,
                        t_vv=rho2 * g + 2.0 * rho1 * g_v + rho * g_vv)
        du = u - self.u_ref
        z = np.zeros(np.broadcast(u, v).shape)
        return dict(t=rho * du, t_u=rho + z, t_v=rho1 * du,
                    t_uu=z, t_uv=rho1 + z, t_vv=rho2 * du)


@dataclass
class RuledBendingSpec:
    """Bending data: base family, reference u-line, new curvature, branch sign."""

    family: cf.ConfocalFamily
    u_ref: float
    kappa: Callable[[np.ndarray], np.ndarray]
    sigma: int = 1

    def __post_init__(self):
        if self.sigma not in (1, -1):
            raise ValidityError("sigma must be +1 or -1")


def base_curvature(family: cf.ConfocalFamily, u_ref: float) -> Callable:
    """Geodesic curvature v -> kappa(v) of the base spherical ruling image."""
    prof = RulingProfile(family, u_ref)

    def kappa(v):
        return prof.frame_data(v)["kappa"]

    return kappa


class FrameSolution:
    """Dense RK4 solution of the bent frame with cubic Hermite evaluation."""

    def __init__(self, vk: np.ndarray, states: np.ndarray, derivs: np.ndarray):
        self.vk = vk
        self.states = states      # (K, 9): w_tilde, n_tilde, c_tilde
        self.derivs = derivs      # (K, 9)

    def __call__(self, v):
        v = np.asarray(v, float)
        k = np.clip(np.searchsorted(self.vk, v, side="right") - 1, 0, len(self.vk) - 2)
        h = self.vk[k + 1] - self.vk[k]
        s = (v - self.vk[k]) / h
        s = s[..., None]
        h = h[..., None]
        y0, y1 = self.states[k], self.states[k + 1]
        d0, d1 = self.derivs[k], self.derivs[k + 1]
        h00 = (1.0 + 2.0 * s) * (1.0 - s) ** 2
        h10 = s * (1.0 - s) ** 2
        h01 = s * s * (3.0 - 2.0 * s)
        h11 = s * s * (s - 1.0)
        y = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
        return y[..., 0:3], y[..., 3:6], y[..., 6:9]


class BentSeed:
    """Seed surface isometric to the base patch, with analytic jets.

    jets(u, v) broadcasts over arrays; the frame is exact at integration
    nodes and Hermite-interpolated (O(h^4)) in between.
    """

    def __init__(self, spec: RuledBendingSpec, v_min: float, v_max: float,
                 steps: int = 4096):
        self.spec = spec
        self.profile = RulingProfile(spec.family, spec.u_ref)
        self._integrate(float(v_min), float(v_max), int(steps))

    # frame ODE right-hand side ------------------------------------------------

    @staticmethod
    def _rhs_from(coeff, y):
        """RHS from a precomputed (s, kappa_tilde, p, q, sigma*r) tuple."""
        s, kt, p, q, sr = coeff
        w, n, c = y[0:3], y[3:6], y[6:9]
        b = np.cross(w, n)
        out = np.empty(9)
        out[0:3] = s * n
        out[3:6] = s * (kt * b - w)
        out[6:9] = p * w + q * n + sr * b
        return out

    def _stage_coeffs(self, v):
        fd = self.profile.frame_data(v)
        kt = np.asarray(self.spec.kappa(v), float)
        if not np.all(np.isfinite(kt)):
            raise QuadratureError("new curvature not finite on the v-range")
        return np.stack([fd["s"], kt, fd["p"], fd["q"],
                         self.spec.sigma * fd["r"]], axis=0)

    def _integrate(self, v_min, v_max, steps):
        prof = self.profile
        fd0 = prof.frame_data(v_min)
        r_all = prof.frame_data(np.linspace(v_min, v_max, 2 * steps + 1))["r"]
        if np.min(np.abs(r_all)) < VALIDITY_FLOOR:
            raise ValidityError(
                f"bending component |c'.b| dips to {np.min(np.abs(r_all)):.2e}; "
                "directrix nearly tangent to the osculating plane"
            )
        y = np.concatenate([fd0["what"], fd0["n"], fd0["c"]])
        vk = np.linspace(v_min, v_max, steps + 1)
        h = (v_max - v_min) / steps
        cN = self._stage_coeffs(vk)                      # (5, steps+1)
        cM = self._stage_coeffs(vk[:-1] + 0.5 * h)       # (5, steps)
        states = np.empty((steps + 1, 9))
        derivs = np.empty((steps + 1, 9))
        states[0] = y
        derivs[0] = self._rhs_from(cN[:, 0], y)
        for k in range(steps):
            k1 = self._rhs_from(cN[:, k], y)
            k2 = self._rhs_from(cM[:, k], y + 0.5 * h * k1)
            k3 = self._rhs_from(cM[:, k], y + 0.5 * h * k2)
            k4 = self._rhs_from(cN[:, k + 1], y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(y)):
                raise QuadratureError(f"frame integration lost finiteness at v={vk[k + 1]}")
            # re-orthonormalize the frame part; drift stays at rounding level
            w = y[0:3] / np.linalg.norm(y[0:3])
            n = y[3:6] - (y[3:6] @ w) * w
            n /= np.linalg.norm(n)
            y = np.concatenate([w, n, y[6:9]])
            states[k + 1] = y
            derivs[k + 1] = self._rhs_from(cN[:, k + 1], y)
        self.frame = FrameSolution(vk, states, derivs)
        self.v_range = (v_min, v_max)

    # jets ----------------------------------------------------------------------

    def jets(self, u, v) -> cf.JetPoint:
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        fd = self.profile.frame_data(v)
        td = self.profile.t_data(u, v)
        w, n, c = self.frame(v)
        b = np.cross(w, n)
        s = fd["s"][..., None]
        s1 = fd["s1"][..., None]
        kt = np.asarray(self.spec.kappa(v), float)[..., None]
        sg = self.spec.sigma
        w1 = s * n
        n1 = s * (kt * b - w)
        b1 = -(s * kt) * n
        w2 = s1 * n + s * n1
        c1 = fd["p"][..., None] * w + fd["q"][..., None] * n + sg * fd["r"][..., None] * b
        c2 = (fd["p1"][..., None] * w + fd["p"][..., None] * w1
              + fd["q1"][..., None] * n + fd["q"][..., None] * n1
              + sg * fd["r1"][..., None] * b + sg * fd["r"][..., None] * b1)
        t, t_u, t_v = td["t"][..., None], td["t_u"][..., None], td["t_v"][..., None]
        t_uu, t_uv, t_vv = td["t_uu"][..., None], td["t_uv"][..., None], td["t_vv"][..., None]
        x = c + t * w
        x_u = t_u * w
        x_v = c1 + t_v * w + t * w1
        x_uu = t_uu * w
        x_uv = t_uv * w + t_u * w1
        x_vv = c2 + t_vv * w + 2.0 * t_v * w1 + t * w2
        N = _unit(np.cross(x_u, x_v))
        return cf.JetPoint(x=x, x_u=x_u, x_v=x_v, x_uu=x_uu, x_uv=x_uv,
                           x_vv=x_vv, N=N, N_hat=None)

    def patch(self, grid: Grid2D) -> SurfacePatch:
        uu, vv = grid.mesh()
        j = self.jets(uu, vv)
        p = SurfacePatch(grid=grid, x=j.x, x_u=j.x_u, x_v=j.x_v, x_uu=j.x_uu,
                         x_uv=j.x_uv, x_vv=j.x_vv, N=j.N, provenance="bent")
        p.check_immersion()
        return p


class QuadricSeed:
    """The trivial seed: the base quadric patch itself."""

    def __init__(self, family: cf.ConfocalFamily):
        self.family = family

    def jets(self, u, v) -> cf.JetPoint:
        return cf.evaluate(self.family, 0.0, u, v)

    def patch(self, grid: Grid2D) -> SurfacePatch:
        from .rolling import quadric_patch
        return quadric_patch(self.family, 0.0, grid, provenance="quadric")


class RigidSeed:
    """Base patch moved by a fixed rigid motion."""

    def __init__(self, family: cf.ConfocalFamily, R, t):
        self.family = family
        self.R = np.asarray(R, float)
        self.t = np.asarray(t, float)

    def jets(self, u, v) -> cf.JetPoint:
        j = cf.evaluate(self.family, 0.0, u, v)
        rot = lambda a: np.einsum("ij,...j->...i", self.R, a)
        return cf.JetPoint(x=rot(j.x) + self.t, x_u=rot(j.x_u), x_v=rot(j.x_v),
                           x_uu=rot(j.x_uu), x_uv=rot(j.x_uv), x_vv=rot(j.x_vv),
                           N=rot(j.N) * np.sign(np.linalg.det(self.R)), N_hat=None)

    def patch(self, grid: Grid2D) -> SurfacePatch:
        from .rolling import quadric_patch, rigid_patch
        return rigid_patch(quadric_patch(self.family, 0.0, grid), self.R, self.t)


def bend(spec: RuledBendingSpec, grid: Grid2D, steps: int = 4096) -> SurfacePatch:
    """Bent patch over the grid; first form matches the base patch <= 1e-8."""
    seed = BentSeed(spec, grid.v[0], grid.v[-1], steps=steps)
    return seed.patch(grid)


def isometry_residual(base: SurfacePatch, bent: SurfacePatch) -> float:
    """Max-node, max-coefficient difference of first fundamental forms."""
    from .rolling import isometry_mismatch
    return isometry_mismatch(base, bent)
