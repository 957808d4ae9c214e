"""Rolling a quadric patch over an isometric seed and the flat connection form.

Given two isometric patches x0 (quadric) and x (seed) over a shared grid,
the rolling motion field is

    R = [x_u  x_v  eps N] [x0_u  x0_v  N0]^{-1},     t = x - R x0,

so dx = R dx0 holds node-wise by construction and R is orthogonal exactly
when the patches are isometric.  The connection form

    omega0 = P du + Q dv,   P = N0 x (R^T dR/du N0),  Q = N0 x (R^T dR/dv N0)

is computed from finite differences of R and satisfies the structure
equations d^omega0 + 1/2 omega0 x^ omega0 = 0 and omega0 x^ dx0 = 0 up to
O(h^2), which `flatness_residual` measures per grid cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import confocal as cf
from .errors import GridTooCoarseError, ImmersionError, NotIsometricError

IMMERSION_FLOOR = 1e-8
ISOMETRY_TOL = 1e-6


@dataclass(frozen=True)
class Grid2D:
    """Rectangular parameter grid, axis 0 = u, axis 1 = v."""

    u: np.ndarray
    v: np.ndarray

    @classmethod
    def from_bounds(cls, u_min, u_max, v_min, v_max, nu, nv) -> "Grid2D":
        if nu < 3 or nv < 3:
            raise ValueError("grids need at least 3 nodes per axis")
        return cls(u=np.linspace(u_min, u_max, nu), v=np.linspace(v_min, v_max, nv))

    @property
    def h_u(self) -> float:
        return float(self.u[1] - self.u[0])

    @property
    def h_v(self) -> float:
        return float(self.v[1] - self.v[0])

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.u), len(self.v)

    def mesh(self):
        return np.meshgrid(self.u, self.v, indexing="ij")

    def refine(self) -> "Grid2D":
        """Halve both spacings, keeping the endpoints."""
        return Grid2D.from_bounds(self.u[0], self.u[-1], self.v[0], self.v[-1],
                                  2 * len(self.u) - 1, 2 * len(self.v) - 1)


@dataclass
class SurfacePatch:
    """Per-node jets of a parametrized surface over a Grid2D."""

    grid: Grid2D
    x: np.ndarray
    x_u: np.ndarray
    x_v: np.ndarray
    x_uu: np.ndarray
    x_uv: np.ndarray
    x_vv: np.ndarray
    N: np.ndarray
    provenance: str = "quadric"

    def check_immersion(self, floor: float = IMMERSION_FLOOR) -> None:
        g = np.linalg.norm(np.cross(self.x_u, self.x_v), axis=-1)
        if np.any(g < floor):
            raise ImmersionError(f"|x_u x x_v| dips to {g.min():.3e}")


def quadric_patch(family: cf.ConfocalFamily, z, grid: Grid2D,
                  provenance: str = "quadric") -> SurfacePatch:
    uu, vv = grid.mesh()
    j = cf.evaluate(family, z, uu, vv)
    patch = SurfacePatch(grid=grid, x=j.x, x_u=j.x_u, x_v=j.x_v,
                         x_uu=j.x_uu, x_uv=j.x_uv, x_vv=j.x_vv, N=j.N,
                         provenance=provenance)
    patch.check_immersion()
    return patch


def rigid_patch(patch: SurfacePatch, R, t) -> SurfacePatch:
    """Patch moved by a fixed rigid motion (R, t)."""
    R = np.asarray(R, float)
    t = np.asarray(t, float)
    rot = lambda a: np.einsum("ij,...j->...i", R, a)
    return SurfacePatch(
        grid=patch.grid, x=rot(patch.x) + t,
        x_u=rot(patch.x_u), x_v=rot(patch.x_v),
        x_uu=rot(patch.x_uu), x_uv=rot(patch.x_uv), x_vv=rot(patch.x_vv),
        N=rot(patch.N) * np.sign(np.linalg.det(R)),
        provenance="rigid",
    )


def first_form(patch: SurfacePatch):
    E = np.einsum("...i,...i->...", patch.x_u, patch.x_u)
    F = np.einsum("...i,...i->...", patch.x_u, patch.x_v)
    G = np.einsum("...i,...i->...", patch.x_v, patch.x_v)
    return E, F, G


def isometry_mismatch(a: SurfacePatch, b: SurfacePatch) -> float:
    """Max-node, max-coefficient difference of first fundamental forms."""
    Ea, Fa, Ga = first_form(a)
    Eb, Fb, Gb = first_form(b)
    return float(max(np.abs(Ea - Eb).max(), np.abs(Fa - Fb).max(),
                     np.abs(Ga - Gb).max()))


@dataclass
class RollingField:
    """Per-node rigid motions rolling the base patch onto the seed."""

    R: np.ndarray            # (nu, nv, 3, 3)
    t: np.ndarray            # (nu, nv, 3)
    epsilon: int
    grid: Grid2D


def rolling_field(base: SurfacePatch, seed: SurfacePatch, epsilon: int = 1,
                  isometry_tol: float = ISOMETRY_TOL) -> RollingField:
    """Motion field with R [x0_u x0_v N0] = [x_u x_v eps N] and t = x - R x0.

    epsilon = -1 rolls the base on the other side of the seed.  Raises
    NotIsometricError if the first forms disagree beyond isometry_tol and
    ImmersionError on degenerate jets.
    """
    if base.grid.shape != seed.grid.shape:
        raise NotIsometricError("patches must share the grid")
    if epsilon not in (1, -1):
        raise ValueError("epsilon must be +1 or -1")
    base.check_immersion()
    seed.check_immersion()
    mm = isometry_mismatch(base, seed)
    if mm > isometry_tol:
        raise NotIsometricError(f"first-form mismatch {mm:.3e} exceeds {isometry_tol:g}")
    M = np.stack([base.x_u, base.x_v, base.N], axis=-1)
    F = np.stack([seed.x_u, seed.x_v, epsilon * seed.N], axis=-1)
    # R = F M^{-1}  via  M^T R^T = F^T
    R = np.swapaxes(np.linalg.solve(np.swapaxes(M, -1, -2), np.swapaxes(F, -1, -2)), -1, -2)
    t = seed.x - np.einsum("...ij,...j->...i", R, base.x)
    return RollingField(R=R, t=t, epsilon=epsilon, grid=base.grid)


def rolling_residual(rf: RollingField, base: SurfacePatch, seed: SurfacePatch) -> float:
    """Max relative node residual of (dx - R dx0, N - det(R) R N0)."""
    ru = np.einsum("...ij,...j->...i", rf.R, base.x_u) - seed.x_u
    rv = np.einsum("...ij,...j->...i", rf.R, base.x_v) - seed.x_v
    det = np.linalg.det(rf.R)
    rn = det[..., None] * np.einsum("...ij,...j->...i", rf.R, base.N) - seed.N
    su = np.linalg.norm(seed.x_u, axis=-1).max() + 1.0
    sv = np.linalg.norm(seed.x_v, axis=-1).max() + 1.0
    return float(max(np.linalg.norm(ru, axis=-1).max() / su,
                     np.linalg.norm(rv, axis=-1).max() / sv,
                     np.linalg.norm(rn, axis=-1).max()))


def _fd_axis(arr: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Second-order first derivative along a grid axis.

    Central stencils inside, 3-point one-sided at the edges: uniformly
    O(h^2) so refinement studies see a single convergence rate.
    """
    a = np.moveaxis(arr, axis, 0)
    out = np.empty_like(a)
    out[1:-1] = (a[2:] - a[:-2]) / (2.0 * h)
    out[0] = (-3.0 * a[0] + 4.0 * a[1] - a[2]) / (2.0 * h)
    out[-1] = (3.0 * a[-1] - 4.0 * a[-2] + a[-3]) / (2.0 * h)
    return np.moveaxis(out, 0, axis)


@dataclass
class ConnectionForm:
    """Tangential R^3-valued 1-form omega0 = P du + Q dv on the grid."""

    P: np.ndarray
    Q: np.ndarray
    grid: Grid2D


def connection_form(rf: RollingField, base: SurfacePatch,
                    coarse_tol: float = 1e-4) -> ConnectionForm:
    """omega0 from central finite differences of the rolling rotation.

    P = N0 x (R^T dR/du N0) is tangential by construction.  Raises
    GridTooCoarseError when R^T dR is not reproduced by the cross-product
    action within coarse_tol (checked on the standard basis).
    """
    Ku = _skew_velocity(rf, base, axis=0)
    Kv = _skew_velocity(rf, base, axis=1)
    N0 = base.N
    P = np.cross(N0, np.einsum("...ij,...j->...i", Ku, N0))
    Q = np.cross(N0, np.einsum("...ij,...j->...i", Kv, N0))
    err = max(_reconstruction_error(Ku, P), _reconstruction_error(Kv, Q))
    if err > coarse_tol:
        raise GridTooCoarseError(f"omega reconstruction error {err:.3e} > {coarse_tol:g}")
    return ConnectionForm(P=P, Q=Q, grid=rf.grid)


def _skew_velocity(rf: RollingField, base: SurfacePatch, axis: int) -> np.ndarray:
    h = rf.grid.h_u if axis == 0 else rf.grid.h_v
    dR = _fd_axis(rf.R, h, axis)
    return np.einsum("...ki,...kj->...ij", rf.R, dR)


def connection_reconstruction_error(rf: RollingField, base: SurfacePatch) -> float:
    """max over nodes/basis of |K a - omega x a|, scaled by max(1, |K|)."""
    Ku = _skew_velocity(rf, base, axis=0)
    Kv = _skew_velocity(rf, base, axis=1)
    N0 = base.N
    P = np.cross(N0, np.einsum("...ij,...j->...i", Ku, N0))
    Q = np.cross(N0, np.einsum("...ij,...j->...i", Kv, N0))
    return max(_reconstruction_error(Ku, P), _reconstruction_error(Kv, Q))


def _reconstruction_error(K: np.ndarray, omega: np.ndarray) -> float:
    scale = max(1.0, float(np.abs(K).max()))
    err = 0.0
    for i in range(3):
        a = np.zeros(3)
        a[i] = 1.0
        r = K[..., :, i] - np.cross(omega, a)
        err = max(err, float(np.linalg.norm(r, axis=-1).max()))
    return err / scale


def _cell_mean(node_vals: np.ndarray) -> np.ndarray:
    return 0.25 * (node_vals[:-1, :-1] + node_vals[1:, :-1]
                   + node_vals[:-1, 1:] + node_vals[1:, 1:])


def flatness_residual(omega: ConnectionForm, base: SurfacePatch) -> tuple[float, float]:
    """Max-cell residuals of the two structure equations.

    Returns (|d^omega + 1/2 omega x^ omega|, |omega x^ dx0|) as du^dv
    coefficients evaluated per cell with corner-averaged second-order
    stencils; both converge O(h^2) to zero for genuine rollings.
    """
    P, Q = omega.P, omega.Q
    hu, hv = omega.grid.h_u, omega.grid.h_v
    dQdu = ((Q[1:, :-1] + Q[1:, 1:]) - (Q[:-1, :-1] + Q[:-1, 1:])) / (2.0 * hu)
    dPdv = ((P[:-1, 1:] + P[1:, 1:]) - (P[:-1, :-1] + P[1:, :-1])) / (2.0 * hv)
    curv = dQdu - dPdv + _cell_mean(np.cross(P, Q))
    r1 = float(np.linalg.norm(curv, axis=-1).max())
    tors = _cell_mean(np.cross(P, base.x_v) - np.cross(Q, base.x_u))
    r2 = float(np.linalg.norm(tors, axis=-1).max())
    return r1, r2


def wedge_identity_residual(a, b, P, Q) -> float:
    """|a.w ^ b.w - 1/2 (a x b) . (w x^ w)| on the coefficient pair (P, Q).

    Both sides are du^dv coefficients; the identity is exact, so the
    residual is rounding noise for any inputs.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    P = np.asarray(P, float)
    Q = np.asarray(Q, float)
    lhs = (a @ P) * (b @ Q) - (a @ Q) * (b @ P)
    rhs = (np.cross(a, b) @ np.cross(P, Q))
    return float(abs(lhs - rhs))
