"""Riccati transport of the facet distribution and leaf verification.

Rolling the base quadric over a seed carries the distribution of facets
through the level-z member along; its leaves are the transforms of the
seed.  The transported state is the free ruling parameter (v1 for the
u-ruling family, u1 for the v-ruling family), governed by

    m^T omega0 + 2z d(state) = 0,

a Riccati equation because m is an exact quadratic in the state.  The
connection omega0 is evaluated analytically here (the rolling rotation has
a closed form in the jets of both patches, and bent seeds carry analytic
jets), so path independence of the transport tests the total-integrability
identity rather than finite-difference noise.

States ride a Cash-Karp 4(5) adaptive stepper, vectorized over grid lanes;
on the hyperboloid the state lives on the projective line and switches to
the reciprocal chart y = 1/state beyond |state| > 1e3.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import confocal as cf
from . import tangency as tg
from .bending import BentSeed, QuadricSeed, RigidSeed
from .errors import SpectralZeroError
from .rolling import Grid2D, SurfacePatch, _fd_axis, rolling_field

V1_CHART_SWITCH = 1e3      # |state| beyond which the reciprocal chart takes over
V1_HARD_LIMIT = 1e12       # beyond this a node counts as degenerate
DEFAULT_RTOL = 1e-10

# Cash-Karp 4(5) tableau
_CK_C = np.array([0.0, 1 / 5, 3 / 10, 3 / 5, 1.0, 7 / 8])
_CK_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [3 / 10, -9 / 10, 6 / 5],
    [-11 / 54, 5 / 2, -70 / 27, 35 / 27],
    [1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096],
]
_CK_B5 = np.array([37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771])
_CK_B4 = np.array([2825 / 27648, 0.0, 18575 / 48384, 13525 / 55296, 277 / 14336, 1 / 4])


class RollingConnection:
    """Analytic rolling rotation and connection form for a seed model.

    seed is any object with jets(u, v) -> JetPoint (QuadricSeed, RigidSeed,
    BentSeed); epsilon picks the rolling side.
    """

    def __init__(self, family: cf.ConfocalFamily, seed, epsilon: int = 1):
        self.family = family
        self.seed = seed
        self.epsilon = int(epsilon)

    def _frames(self, u, v, axis: int | None):
        j0 = cf.evaluate(self.family, 0.0, u, v)
        js = self.seed.jets(u, v)
        M = np.stack([j0.x_u, j0.x_v, j0.N], axis=-1)
        F = np.stack([js.x_u, js.x_v, self.epsilon * js.N], axis=-1)
        if axis is None:
            return j0, js, M, F, None, None
        M_a = np.stack([*_second_cols(j0, axis), _normal_partial(j0, axis)], axis=-1)
        F_a = np.stack([*_second_cols(js, axis),
                        self.epsilon * _normal_partial(js, axis)], axis=-1)
        return j0, js, M, F, M_a, F_a

    def rotation(self, u, v):
        """R = [x_u x_v eps N][x0_u x0_v N0]^{-1}; also returns the base jet."""
        j0, js, M, F, _, _ = self._frames(u, v, None)
        R = _solve_right(F, M)
        return R, j0, js

    def omega(self, u, v, axis: int):
        """Connection component along the axis (0: P, 1: Q) plus base jet."""
        j0, js, M, F, M_a, F_a = self._frames(u, v, axis)
        R = _solve_right(F, M)
        RM_a = np.einsum("...ij,...jk->...ik", R, M_a)
        R_a = _solve_right(F_a - RM_a, M)
        K = np.einsum("...ki,...kj->...ij", R, R_a)
        N0 = j0.N
        w = np.cross(N0, np.einsum("...ij,...j->...i", K, N0))
        return w, j0


def _solve_right(F, M):
    """F M^{-1} for stacked 3x3 matrices."""
    return np.swapaxes(
        np.linalg.solve(np.swapaxes(M, -1, -2), np.swapaxes(F, -1, -2)), -1, -2)


def _second_cols(j, axis: int):
    if axis == 0:
        return (j.x_uu, j.x_uv)
    return (j.x_uv, j.x_vv)


def _normal_partial(j, axis: int):
    g = np.cross(j.x_u, j.x_v)
    if axis == 0:
        g_a = np.cross(j.x_uu, j.x_v) + np.cross(j.x_u, j.x_uv)
    else:
        g_a = np.cross(j.x_uv, j.x_v) + np.cross(j.x_u, j.x_vv)
    norm = np.linalg.norm(g, axis=-1, keepdims=True)
    N = g / norm
    return (g_a - N * np.einsum("...i,...i->...", N, g_a)[..., None]) / norm


def riccati_rhs(family: cf.ConfocalFamily, z, x00, state, omega_vec,
                which: str = tg.M_FAMILY) -> np.ndarray:
    """d(state)/d(direction) = -(1/2z) m(state)^T omega_direction.

    Quadratic in the state (inherited from m).  Raises SpectralZeroError at
    z = 0 where the transport degenerates.
    """
    if float(z) == 0.0:
        raise SpectralZeroError("transport undefined at z = 0")
    c2, c1, c0 = tg.m_coefficients(family, z, x00, which)
    w = np.asarray(omega_vec, float)
    t = np.asarray(state, float)
    A = np.einsum("...i,...i->...", c2, w)
    B = np.einsum("...i,...i->...", c1, w)
    C = np.einsum("...i,...i->...", c0, w)
    return -((A * t + B) * t + C) / (2.0 * float(z))


@dataclass
class TransportProblem:
    family: cf.ConfocalFamily
    z: float
    seed: object
    grid: Grid2D
    v1_init: float
    epsilon: int = 1
    state_family: str = tg.M_FAMILY
    rtol: float = DEFAULT_RTOL
    max_step: float = np.inf

    def __post_init__(self):
        if float(self.z) == 0.0:
            raise SpectralZeroError("transport undefined at z = 0")
        self.family.check_z(self.z)


@dataclass
class LeafPatch:
    """Transported leaf over the seed grid with its parameter map and report."""

    grid: Grid2D
    x1: np.ndarray
    u1: np.ndarray
    v1: np.ndarray
    alive: np.ndarray
    state_ufirst: np.ndarray
    state_vfirst: np.ndarray
    path_independence: float
    tangency_residual: float
    blowup_count: int
    problem: TransportProblem = field(repr=False)
    rolling: object = field(repr=False, default=None)


def _coeff_eval(conn: RollingConnection, z: float, which: str):
    """Closure: points -> quadratic Riccati coefficients (A, B, C)."""

    def coeffs(u, v, axis):
        w, j0 = conn.omega(u, v, axis)
        c2, c1, c0 = tg.m_coefficients(conn.family, z, j0.x, which)
        k = -1.0 / (2.0 * z)
        A = k * np.einsum("...i,...i->...", c2, w)
        B = k * np.einsum("...i,...i->...", c1, w)
        C = k * np.einsum("...i,...i->...", c0, w)
        return A, B, C

    return coeffs


def _rhs(y, chart, A, B, C):
    """Riccati RHS in the active chart; the reciprocal chart flips coefficients."""
    direct = (A * y + B) * y + C
    recip = -((C * y + B) * y + A)
    return np.where(chart == 0, direct, recip)


def _switch_charts(y, chart, alive, projective: bool):
    big = np.abs(y) > V1_CHART_SWITCH
    if projective:
        sw = big & (chart == 0) & alive
        y = np.where(sw, 1.0 / y, y)
        chart = np.where(sw, 1, chart)
        back = (np.abs(y) > 1.0 / V1_CHART_SWITCH) & (chart == 1) & alive
        y = np.where(back, 1.0 / y, y)
        chart = np.where(back, 0, chart)
    else:
        alive = alive & ~(big & (chart == 0))
    return y, chart, alive


def _integrate_line(coeffs, s_nodes, y0, chart0, alive0, axis, other, rtol,
                    max_step, projective):
    """Integrate lanes along one grid line, recording the state at each node.

    `other` is the fixed coordinate (array of lane positions or scalar);
    axis says whether s is the u- or v-coordinate.  Returns (Y, CH, AL)
    with leading axis over nodes.
    """
    y = np.array(y0, float, copy=True)
    chart = np.array(chart0, int, copy=True)
    alive = np.array(alive0, bool, copy=True)
    n_nodes = len(s_nodes)
    Y = np.empty((n_nodes,) + y.shape)
    CH = np.empty((n_nodes,) + y.shape, int)
    AL = np.empty((n_nodes,) + y.shape, bool)
    Y[0], CH[0], AL[0] = y, chart, alive

    def coeffs_at(s):
        if axis == 0:
            return coeffs(s, other, 0)
        return coeffs(other, s, 1)

    atol = rtol
    for k in range(n_nodes - 1):
        s, s_end = float(s_nodes[k]), float(s_nodes[k + 1])
        span = s_end - s
        h = np.sign(span) * min(abs(span), max_step)
        while (s_end - s) * np.sign(span) > 1e-14 * abs(span) and alive.any():
            h = np.sign(span) * min(abs(h), abs(s_end - s))
            ks = []
            for i in range(6):
                si = s + _CK_C[i] * h
                yi = y.copy()
                for j, a in enumerate(_CK_A[i]):
                    yi = yi + h * a * ks[j]
                A, B, C = coeffs_at(si)
                ks.append(np.where(alive, _rhs(yi, chart, A, B, C), 0.0))
            y5 = y + h * sum(b * kk for b, kk in zip(_CK_B5, ks))
            y4 = y + h * sum(b * kk for b, kk in zip(_CK_B4, ks))
            err = np.abs(y5 - y4)
            tol = atol + rtol * np.maximum(1.0, np.abs(y5))
            bad = ~np.isfinite(y5) & alive
            if bad.any():
                alive = alive & ~bad
                y = np.where(bad, np.nan, y)
            ratio = np.max(np.where(alive, err / tol, 0.0)) if alive.any() else 0.0
            if ratio <= 1.0:
                s += h
                y = np.where(alive, y5, y)
                y, chart, alive = _switch_charts(y, chart, alive, projective)
            fac = 0.9 * (max(ratio, 1e-16)) ** (-0.2)
            h = h * min(5.0, max(0.2, fac))
            if abs(h) < 1e-13 * max(abs(span), 1.0):
                # stuck lane: freeze the worst offenders
                worst = alive & (err / tol >= np.max(np.where(alive, err / tol, 0.0)))
                alive = alive & ~worst
                y = np.where(worst, np.nan, y)
                h = np.sign(span) * abs(span)
        Y[k + 1], CH[k + 1], AL[k + 1] = y, chart, alive
    return Y, CH, AL


def _to_direct(Y, CH):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(CH == 1, 1.0 / Y, Y)


def _transport_field(problem: TransportProblem, conn: RollingConnection,
                     order: str) -> tuple[np.ndarray, np.ndarray]:
    """State field over the grid for one path order ('u-first' or 'v-first')."""
    grid = problem.grid
    coeffs = _coeff_eval(conn, problem.z, problem.state_family)
    projective = problem.family.kind == cf.HYPERBOLOID
    kw = dict(rtol=problem.rtol, max_step=problem.max_step, projective=projective)
    y0 = np.array([problem.v1_init])
    c0 = np.zeros(1, int)
    a0 = np.ones(1, bool)
    if order == "u-first":
        # along u on the v = v[0] edge, then up each column
        Ye, Ce, Ae = _integrate_line(coeffs, grid.u, y0, c0, a0, 0,
                                     float(grid.v[0]), **kw)
        Y, C, A = _integrate_line(coeffs, grid.v, Ye[:, 0], Ce[:, 0], Ae[:, 0],
                                  1, grid.u, **kw)
        state = _to_direct(Y, C).T          # (nu, nv)
        alive = A.T
    elif order == "v-first":
        Ye, Ce, Ae = _integrate_line(coeffs, grid.v, y0, c0, a0, 1,
                                     float(grid.u[0]), **kw)
        Y, C, A = _integrate_line(coeffs, grid.u, Ye[:, 0], Ce[:, 0], Ae[:, 0],
                                  0, grid.v, **kw)
        state = _to_direct(Y, C)            # (nu, nv)
        alive = A
    else:
        raise ValueError(f"unknown path order {order!r}")
    return state, alive


def transport(problem: TransportProblem) -> LeafPatch:
    """Integrate the transport over the grid and assemble the leaf.

    Both axis-aligned path orders are integrated; their max node difference
    is the path-independence figure.  The solved parameter (u1 for the m
    family) is re-solved algebraically at every node, so tangency holds at
    rounding level.  Nodes whose state escapes the chart are reported, not
    fatal.
    """
    conn = RollingConnection(problem.family, problem.seed, problem.epsilon)
    s_u, alive_u = _transport_field(problem, conn, "u-first")
    s_v, alive_v = _transport_field(problem, conn, "v-first")
    alive = alive_u & alive_v
    both = alive & np.isfinite(s_u) & np.isfinite(s_v)
    path_independence = float(np.abs(s_u - s_v)[both].max()) if both.any() else np.nan

    state = np.where(alive_u, s_u, np.nan)
    alive = alive_u & np.isfinite(state) & (np.abs(state) < V1_HARD_LIMIT)
    uu, vv = problem.grid.mesh()
    leaf = _assemble_leaf(problem, conn, uu, vv, state, alive)
    leaf.state_ufirst = s_u
    leaf.state_vfirst = s_v
    leaf.path_independence = path_independence
    return leaf


def leaf_from_state(problem: TransportProblem, state: np.ndarray) -> LeafPatch:
    """Leaf assembled from a caller-supplied state field (no transport).

    Used for negative controls: a field that does not satisfy the transport
    equation yields a surface violating the applicability checks.
    """
    conn = RollingConnection(problem.family, problem.seed, problem.epsilon)
    uu, vv = problem.grid.mesh()
    state = np.broadcast_to(np.asarray(state, float), uu.shape)
    alive = np.isfinite(state) & (np.abs(state) < V1_HARD_LIMIT)
    return _assemble_leaf(problem, conn, uu, vv, state, alive)


def _assemble_leaf(problem, conn, uu, vv, state, alive) -> LeafPatch:
    family, z = problem.family, problem.z
    safe = np.where(alive, state, 0.0)
    if problem.state_family == tg.M_FAMILY:
        cfg = tg.solve_tangency(family, z, uu, vv, safe, strict=False)
        u1, v1 = cfg.u1, safe
        if family.kind != cf.HYPERBOLOID:
            alive = alive & np.isfinite(u1)
        tang = cfg.tangency_residual()
        xz1, V01 = cfg.xz1, cfg.V01
    else:
        v1_solved, _ = tg.solve_tangency_mirror(family, z, uu, vv, safe, strict=False)
        u1, v1 = safe, v1_solved
        if family.kind != cf.HYPERBOLOID:
            alive = alive & np.isfinite(v1_solved)
        inf_mask = ~np.isfinite(v1_solved)
        v1s = np.where(inf_mask, 0.0, v1_solved)
        j1 = cf.evaluate(family, z, np.where(np.abs(u1 - v1s) < 1e-8, u1 + 1.0, u1), v1s) \
            if family.kind == cf.HYPERBOLOID else cf.evaluate(family, z, u1, v1s)
        xz1 = j1.x
        if inf_mask.any() and family.kind == cf.HYPERBOLOID:
            xz1 = np.where(inf_mask[..., None],
                           cf.point_at_v_infinity(family, z, u1), xz1)
        j0 = cf.evaluate(family, 0.0, uu, vv)
        V01 = xz1 - j0.x
        nh = j0.N_hat
        tang = np.abs(np.einsum("...i,...i->...", V01, nh)) / np.maximum(
            np.linalg.norm(V01, axis=-1) * np.linalg.norm(nh, axis=-1), 1e-300)

    R, j0, js = conn.rotation(uu, vv)
    x1 = js.x + np.einsum("...ij,...j->...i", R, V01)
    x1 = np.where(alive[..., None], x1, np.nan)
    fin_tang = tang[alive & np.isfinite(tang)]
    rolling = rolling_field(
        _patch_from_jets(problem.grid, j0), _patch_from_jets(problem.grid, js),
        problem.epsilon)
    return LeafPatch(
        grid=problem.grid, x1=x1, u1=np.where(alive, u1, np.nan),
        v1=np.where(alive, v1, np.nan), alive=alive,
        state_ufirst=None, state_vfirst=None, path_independence=np.nan,
        tangency_residual=float(fin_tang.max()) if fin_tang.size else np.nan,
        blowup_count=int(np.count_nonzero(~alive)), problem=problem,
        rolling=rolling)


def _patch_from_jets(grid, j) -> SurfacePatch:
    return SurfacePatch(grid=grid, x=j.x, x_u=j.x_u, x_v=j.x_v, x_uu=j.x_uu,
                        x_uv=j.x_uv, x_vv=j.x_vv, N=j.N)


# ---------------------------------------------------------------------------
# verification


def _fd_first_form(x: np.ndarray, grid: Grid2D):
    xu = _fd_axis(x, grid.h_u, 0)
    xv = _fd_axis(x, grid.h_v, 1)
    E = np.einsum("...i,...i->...", xu, xu)
    F = np.einsum("...i,...i->...", xu, xv)
    G = np.einsum("...i,...i->...", xv, xv)
    return E, F, G, xu, xv


def _fd_second_form(x: np.ndarray, grid: Grid2D):
    xu = _fd_axis(x, grid.h_u, 0)
    xv = _fd_axis(x, grid.h_v, 1)
    N = np.cross(xu, xv)
    N = N / np.linalg.norm(N, axis=-1, keepdims=True)
    xuu = _fd_axis(xu, grid.h_u, 0)
    xuv = _fd_axis(xu, grid.h_v, 1)
    xvv = _fd_axis(xv, grid.h_v, 1)
    e = np.einsum("...i,...i->...", N, xuu)
    f = np.einsum("...i,...i->...", N, xuv)
    g = np.einsum("...i,...i->...", N, xvv)
    return e, f, g, N


def _ivory_partner_points(leaf: LeafPatch):
    """x_0(u1, v1) at the leaf nodes, limit chart where u1 or v1 is infinite."""
    family = leaf.problem.family
    u1, v1 = leaf.u1, leaf.v1
    fin = np.isfinite(u1) & np.isfinite(v1) & leaf.alive
    u1s = np.where(fin, u1, 0.0)
    v1s = np.where(fin, v1, 0.0)
    if family.kind == cf.HYPERBOLOID:
        clash = np.abs(u1s - v1s) < 1e-8
        u1s = np.where(clash, u1s + 1.0, u1s)
    y = cf.evaluate(family, 0.0, u1s, v1s).x
    inf_u = leaf.alive & ~np.isfinite(u1) & np.isfinite(v1)
    if inf_u.any():
        y = np.where(inf_u[..., None],
                     cf.evaluate_at_infinity(family, 0.0, np.where(inf_u, v1, 0.0)), y)
    inf_v = leaf.alive & np.isfinite(u1) & ~np.isfinite(v1)
    if inf_v.any():
        y = np.where(inf_v[..., None],
                     cf.point_at_v_infinity(family, 0.0, np.where(inf_v, u1, 0.0)), y)
    valid = leaf.alive & (np.isfinite(u1) | np.isfinite(v1))
    return np.where(valid[..., None], y, np.nan), valid


@dataclass
class LeafReport:
    isometry_residual: float
    congruence_seed_side: float
    congruence_leaf_side: float
    congruence_leaf_fd: float
    weingarten_residual: float
    ivory_consistency: float
    alive_fraction: float
    regular_fraction: float

    def to_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in (
            "isometry_residual", "congruence_seed_side", "congruence_leaf_side",
            "congruence_leaf_fd", "weingarten_residual", "ivory_consistency",
            "alive_fraction", "regular_fraction")}


# Congruence-regularity thresholds: nodes where the congruence line falls
# within this angle of the leaf ruling (focal coalescence), or where the
# solved parameter approaches the chart pole u1 = v1, are excluded from the
# finite-difference statistics.
REG_SIN_MIN = 0.1
REG_SEP_MIN = 0.05


def congruence_regular_mask(leaf: LeafPatch, seed_patch: SurfacePatch) -> np.ndarray:
    """Nodes where the seed-leaf congruence is transversal to the leaf ruling."""
    problem = leaf.problem
    family, z = problem.family, problem.z
    ok = leaf.alive & np.isfinite(leaf.u1) & np.isfinite(leaf.v1) \
        & np.isfinite(leaf.x1).all(axis=-1)
    V = leaf.x1 - seed_patch.x
    if problem.state_family == tg.M_FAMILY:
        w = cf.u_ruling(family, z, np.where(ok, leaf.v1, 0.0))
    else:
        w = cf.v_ruling(family, z, np.where(ok, leaf.u1, 0.0))
    uu, vv = leaf.grid.mesh()
    conn = RollingConnection(family, problem.seed, problem.epsilon)
    R, _, _ = conn.rotation(uu, vv)
    Rw = np.einsum("...ij,...j->...i", R, w)
    sin_a = np.linalg.norm(np.cross(V, Rw), axis=-1) / np.maximum(
        np.linalg.norm(V, axis=-1) * np.linalg.norm(Rw, axis=-1), 1e-300)
    mask = ok & (sin_a >= REG_SIN_MIN)
    if family.kind == cf.HYPERBOLOID:
        mask &= np.abs(leaf.u1 - leaf.v1) >= REG_SEP_MIN
    return mask


def verify_leaf(leaf: LeafPatch, seed_patch: SurfacePatch) -> LeafReport:
    """Applicability, congruence tangency, Weingarten and Ivory-image checks.

    (a) first form of the leaf in (u0, v0) versus the Ivory partner surface
        x_0(u1, v1), both by the same finite-difference stencils: O(h^2);
    (b) the congruence line V = x1 - x0 against both tangent planes: the
        seed side with the analytic normal, the leaf side through the
        un-rolled static symmetry (V_1^0)^T N_hat_0^1 = 0, plus an
        FD-normal variant reported for convergence studies;
    (c) proportionality of the second fundamental forms (Weingarten);
    (d) inverse-Ivory of the un-rolled leaf point against x_0(u1, v1).

    Finite-difference statistics (a), (c) and the FD variant of (b) are
    taken over congruence-regular interior nodes; the static checks run on
    every live node.
    """
    problem = leaf.problem
    family, z, grid = problem.family, problem.z, leaf.grid
    y, valid = _ivory_partner_points(leaf)
    ok = valid & np.isfinite(leaf.x1).all(axis=-1)
    regular = congruence_regular_mask(leaf, seed_patch)
    interior = np.zeros(valid.shape, bool)
    interior[1:-1, 1:-1] = True
    deep = np.zeros(valid.shape, bool)
    deep[4:-4, 4:-4] = True

    # (a) isometry to the Ivory partner surface
    El, Fl, Gl, xu_l, xv_l = _fd_first_form(leaf.x1, grid)
    Ey, Fy, Gy, _, _ = _fd_first_form(y, grid)
    m = ok & regular & interior
    scale = np.maximum.reduce([np.abs(Ey), np.abs(Gy), np.ones_like(Ey)])
    iso = np.max(np.abs(np.stack([El - Ey, Fl - Fy, Gl - Gy])) / scale, axis=0)
    iso_res = float(iso[m].max()) if m.any() else np.nan

    # (b) congruence tangency
    V = leaf.x1 - seed_patch.x
    Vn = np.linalg.norm(V, axis=-1)
    seed_side = np.abs(np.einsum("...i,...i->...", seed_patch.N, V)) / np.maximum(Vn, 1e-300)
    seed_res = float(seed_side[ok].max()) if ok.any() else np.nan

    xz0 = cf.ivory_map(family, z, cf.evaluate(family, 0.0, *grid.mesh()).x)
    V10 = xz0 - y
    nh1 = cf.normal_scaled(family, 0.0, y)
    leaf_side = np.abs(np.einsum("...i,...i->...", V10, nh1)) / np.maximum(
        np.linalg.norm(V10, axis=-1) * np.linalg.norm(nh1, axis=-1), 1e-300)
    leaf_res = float(leaf_side[ok].max()) if ok.any() else np.nan

    Nl_fd = np.cross(xu_l, xv_l)
    Nl_fd = Nl_fd / np.maximum(np.linalg.norm(Nl_fd, axis=-1, keepdims=True), 1e-300)
    leaf_fd = np.abs(np.einsum("...i,...i->...", Nl_fd, V)) / np.maximum(Vn, 1e-300)
    leaf_fd_res = float(leaf_fd[m].max()) if m.any() else np.nan

    # (c) Weingarten: second forms proportional
    e0 = np.einsum("...i,...i->...", seed_patch.N, seed_patch.x_uu)
    f0 = np.einsum("...i,...i->...", seed_patch.N, seed_patch.x_uv)
    g0 = np.einsum("...i,...i->...", seed_patch.N, seed_patch.x_vv)
    e1, f1, g1, _ = _fd_second_form(leaf.x1, grid)
    n0 = np.sqrt(e0 ** 2 + f0 ** 2 + g0 ** 2)
    n1 = np.sqrt(e1 ** 2 + f1 ** 2 + g1 ** 2)
    cross = np.maximum.reduce([np.abs(e0 * f1 - f0 * e1),
                               np.abs(e0 * g1 - g0 * e1),
                               np.abs(f0 * g1 - g0 * f1)])
    wres = cross / np.maximum(n0 * n1, 1e-300)
    md = ok & regular & deep
    w_res = float(wres[md].max()) if md.any() else np.nan

    # (d) un-roll + inverse Ivory lands on x_0(u1, v1)
    R = leaf.rolling.R
    t = leaf.rolling.t
    unrolled = np.einsum("...ji,...j->...i", R, leaf.x1 - t)
    back = cf.ivory_map_inverse(family, z, unrolled)
    ivc = np.linalg.norm(back - y, axis=-1) / (np.linalg.norm(y, axis=-1) + 1.0)
    ivc_res = float(ivc[ok].max()) if ok.any() else np.nan

    return LeafReport(
        isometry_residual=iso_res,
        congruence_seed_side=seed_res,
        congruence_leaf_side=leaf_res,
        congruence_leaf_fd=leaf_fd_res,
        weingarten_residual=w_res,
        ivory_consistency=ivc_res,
        alive_fraction=float(leaf.alive.mean()),
        regular_fraction=float(regular.mean()),
    )


def inversion_check(leaf: LeafPatch, seed_patch: SurfacePatch) -> float:
    """Residual of the reverse transform: the seed is the transform of the leaf.

    Two ingredients, the max is returned:

      * static partner-side tangency: the congruence line V' = x0 - x1,
        un-rolled, satisfies (V_1^0)^T N_hat_0^1 = 0;
      * the reverse rolling: composing the forward rolling with the inverse
        of the per-node Ivory motion must roll the partner patch x_0(u1,v1)
        onto the leaf, checked on the differentials (finite differences,
        O(h^2)); this part is what a wrong transported field breaks.

    Degenerate leaves (constant state: line leaves of trivial/rigid seeds)
    carry no differentials to check, so only the static part applies there.
    """
    problem = leaf.problem
    family, z = problem.family, problem.z
    y, valid = _ivory_partner_points(leaf)
    ok = valid & np.isfinite(leaf.x1).all(axis=-1)
    if not ok.any():
        return np.nan
    xz0 = cf.ivory_map(family, z, cf.evaluate(family, 0.0, *leaf.grid.mesh()).x)
    V10 = xz0 - y
    nh1 = cf.normal_scaled(family, 0.0, y)
    static = np.abs(np.einsum("...i,...i->...", V10, nh1)) / np.maximum(
        np.linalg.norm(V10, axis=-1) * np.linalg.norm(nh1, axis=-1), 1e-300)
    res = float(static[ok].max())

    if line_fit_residual(leaf.x1) <= 1e-8:
        # the leaf degenerated to a line: nothing to roll, static part only
        return res

    from . import ivory as iv
    grid = leaf.grid
    uu, vv = grid.mesh()
    u1s = np.where(np.isfinite(leaf.u1), leaf.u1, np.where(ok, leaf.v1, 0.0) + 1.0)
    v1s = np.where(np.isfinite(leaf.v1), leaf.v1, 0.0)
    pair = iv.make_pair(family, z, uu, vv, u1s, v1s)
    fam0 = "u" if problem.state_family == tg.M_FAMILY else "v"
    miv = iv.build_ivory_motion(pair, fam0, fam0)
    R1 = np.einsum("...ik,...jk->...ij", leaf.rolling.R, miv.R)
    yu = _fd_axis(y, grid.h_u, 0)
    yv = _fd_axis(y, grid.h_v, 1)
    xu = _fd_axis(leaf.x1, grid.h_u, 0)
    xv = _fd_axis(leaf.x1, grid.h_v, 1)
    ru = np.linalg.norm(xu - np.einsum("...ij,...j->...i", R1, yu), axis=-1) \
        / (np.linalg.norm(xu, axis=-1) + 1.0)
    rv = np.linalg.norm(xv - np.einsum("...ij,...j->...i", R1, yv), axis=-1) \
        / (np.linalg.norm(xv, axis=-1) + 1.0)
    m = congruence_regular_mask(leaf, seed_patch)
    m[:2, :] = m[-2:, :] = False
    m[:, :2] = m[:, -2:] = False
    if m.any():
        res = max(res, float(ru[m].max()), float(rv[m].max()))
    return res


def line_fit_residual(points: np.ndarray) -> float:
    """Max distance of points from their best-fit line over the point scale."""
    P = points.reshape(-1, 3)
    P = P[np.isfinite(P).all(axis=1)]
    c = P.mean(axis=0)
    Q = P - c
    _, _, Vt = np.linalg.svd(Q, full_matrices=False)
    d = Q - np.outer(Q @ Vt[0], Vt[0])
    scale = max(float(np.linalg.norm(Q, axis=1).max()), 1.0)
    return float(np.linalg.norm(d, axis=1).max()) / scale


def facet_mirror_residual(leaf: LeafPatch) -> float:
    """Rolled facet normals of the two ruling families mirror in the seed's
    tangent plane: R m' is parallel to (I - 2 N N^T) R m at every node."""
    problem = leaf.problem
    family, z = problem.family, problem.z
    uu, vv = leaf.grid.mesh()
    conn = RollingConnection(family, problem.seed, problem.epsilon)
    R, j0, js = conn.rotation(uu, vv)
    ok = leaf.alive & np.isfinite(leaf.u1) & np.isfinite(leaf.v1)
    cfg = tg.with_free_u1(family, z, uu, vv, np.where(ok, leaf.v1, 0.0),
                          np.where(ok, leaf.u1, 1.0 + np.where(ok, leaf.v1, 0.0)))
    m = tg.m_field(cfg, tg.M_FAMILY).m
    mp = tg.m_field(cfg, tg.MPRIME_FAMILY).m
    Rm = np.einsum("...ij,...j->...i", R, m)
    Rmp = np.einsum("...ij,...j->...i", R, mp)
    Ns = js.N
    mir = Rm - 2.0 * np.einsum("...i,...i->...", Rm, Ns)[..., None] * Ns
    cr = np.linalg.norm(np.cross(mir, Rmp), axis=-1)
    den = np.linalg.norm(mir, axis=-1) * np.linalg.norm(Rmp, axis=-1)
    val = cr / np.maximum(den, 1e-300)
    return float(val[ok].max()) if ok.any() else np.nan
