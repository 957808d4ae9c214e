"""Tangency configurations and the facet-distribution normal fields.

A tangency configuration is a pair (p0 at z=0, p1 at level z) with the
Ivory image x_z^1 lying in the tangent plane of the base quadric at x_0^0:
(V_0^1)^T N_hat_0^0 = 0.  For fixed (u0, v0, v1) this is affine in u1, so
`solve_tangency` is a linear solve; the normal field of the facet
distribution,

    m = B_1 x_{z,u1}^1 x V_0^1            (u-ruling family, "m")
    m' = B_1 x_{z,v1}^1 x V_0^1           (v-ruling family, "m'")

is independent of the solved variable and an exact quadratic polynomial in
the free one, which is what makes the transport equation a Riccati equation.
The conditional identities verified here:

    reflection      (x_{z,v1})^T (I - 2 N N^T) m = 0
    factorization   4 (B_1 x_{z,u1})^T N N^T x_{z,v1} = -4z
    integrability   N^T (2z m + m x m_t) = 0

(the factorization is stated in the B_1-scaled form, finite even at the
u1-at-infinity chart point).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import confocal as cf
from .errors import DomainError, NoSolutionError

M_FAMILY = "m"
MPRIME_FAMILY = "m'"

STATUS_FINITE = "finite"
STATUS_AT_INFINITY = "at_infinity"
STATUS_RULING_LINE = "ruling_line"
STATUS_FORCED = "forced"

# Routing threshold: configurations this close to a vanishing leading
# coefficient go to the limit chart.
EPS_COEFF = 1e-6


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def _poly_data(family: cf.ConfocalFamily, z, which: str):
    """(A2, A1, A0, B1, B0): scaled-ruling and anchor-point coefficients.

    The scaled ruling w(t) = A2 t^2 + A1 t + A0 and anchor point
    p(t) = B1 t + B0 parametrize the rulings of the level-z member by the
    free parameter t (t = v1 for the u-ruling family, t = u1 for the
    v-ruling family); the anchor is the chart point where the solved
    parameter vanishes (or the limit point on the hyperboloid).
    """
    alpha, beta, gamma = family.level_constants(z)
    zf = float(z)
    if family.kind == cf.HYPERBOLOID:
        if which == M_FAMILY:
            A2 = np.array([alpha, -beta, 0.0])
            A1 = np.array([0.0, 0.0, -2.0 * gamma])
            A0 = np.array([-alpha, -beta, 0.0])
            B1 = np.array([-alpha, beta, 0.0])
            B0 = np.array([0.0, 0.0, gamma])
        else:
            A2 = np.array([-alpha, beta, 0.0])
            A1 = np.array([0.0, 0.0, 2.0 * gamma])
            A0 = np.array([alpha, beta, 0.0])
            B1 = np.array([alpha, -beta, 0.0])
            B0 = np.array([0.0, 0.0, -gamma])
    else:
        if which == M_FAMILY:
            A2 = np.zeros(3)
            A1 = np.array([0.0, 0.0, 2.0])
            A0 = np.array([alpha, beta, 0.0])
            B1 = np.array([alpha, -beta, 0.0])
            B0 = np.array([0.0, 0.0, zf / 2.0])
        else:
            A2 = np.zeros(3)
            A1 = np.array([0.0, 0.0, 2.0])
            A0 = np.array([alpha, -beta, 0.0])
            B1 = np.array([alpha, beta, 0.0])
            B0 = np.array([0.0, 0.0, zf / 2.0])
    return A2, A1, A0, B1, B0


def m_coefficients(family: cf.ConfocalFamily, z, x00, which: str = M_FAMILY):
    """Vector coefficients (c2, c1, c0) of the quadratic m(t) = B_1 w x V.

    x00 may carry leading axes.  The would-be cubic coefficient A2 x B1
    vanishes identically for both quadric kinds.
    """
    A2, A1, A0, B1, B0 = _poly_data(family, z, which)
    x00 = np.asarray(x00, float)
    d = B0 - x00
    c2 = np.cross(A2, d) + np.cross(A1, B1) * np.ones_like(d)
    c1 = np.cross(A1, d) + np.cross(A0, B1) * np.ones_like(d)
    c0 = np.cross(A0, d)
    return c2, c1, c0


def m_direct(family: cf.ConfocalFamily, z, u1, v1, x00) -> np.ndarray:
    """m evaluated literally at (u1, v1): B_1 x_{z,u1} x (x_z - x00).

    Independent route used to cross-check the polynomial coefficients and
    the u1-independence of m.
    """
    j = cf.evaluate(family, z, u1, v1)
    B1 = cf.B_factor(family, u1, v1)
    return np.cross(B1[..., None] * j.x_u, j.x - np.asarray(x00, float))


@dataclass
class MField:
    """Facet-distribution normal at a configuration.

    m_v1 is the partial in the distribution's free ruling parameter: the
    v1-partial for family "m", the u1-partial for family "m'".
    """

    m: np.ndarray
    m_v1: np.ndarray
    family: str


@dataclass
class TangencyConfig:
    """Solved tangency configuration (u0, v0, u1, v1, z) with cached geometry.

    u1 is +inf for configurations routed to the limit chart; status is one
    of finite / at_infinity / ruling_line / forced (forced = caller-supplied
    u1, used for negative controls).
    """

    family: cf.ConfocalFamily
    z: float
    u0: np.ndarray
    v0: np.ndarray
    v1: np.ndarray
    u1: np.ndarray
    status: str
    x00: np.ndarray
    N00: np.ndarray
    Nhat00: np.ndarray
    xz1: np.ndarray
    V01: np.ndarray
    B1: np.ndarray
    wz_u1: np.ndarray
    xz_v1: np.ndarray

    def tangency_residual(self) -> np.ndarray:
        num = np.abs(_dot(self.V01, self.Nhat00))
        den = np.linalg.norm(self.V01, axis=-1) * np.linalg.norm(self.Nhat00, axis=-1)
        return num / np.maximum(den, 1e-300)


def tangency_coefficients(family: cf.ConfocalFamily, z, u0, v0, v1):
    """(c1, c0) of the affine tangency equation c1 u1 + c0 = 0.

    On the hyperboloid the equation is (u1 - v1)(V_0^1)^T N_hat_0^0
    expanded in u1; on the paraboloid (V_0^1)^T N_hat_0^0 itself is affine.
    """
    alpha, beta, gamma = family.level_constants(z)
    j0 = cf.evaluate(family, 0.0, u0, v0)
    x00, nh = j0.x, j0.N_hat
    v1 = np.asarray(v1, float)
    if family.kind == cf.HYPERBOLOID:
        lim = cf.evaluate_at_infinity(family, z, v1)
        c1 = _dot(lim - x00, nh)
        const = np.stack(np.broadcast_arrays(alpha + 0.0 * v1, beta + 0.0 * v1,
                                             gamma * v1), axis=-1)
        c0 = _dot(const, nh) + v1 * _dot(x00, nh)
    else:
        wz = cf.u_ruling(family, z, v1)
        c1 = _dot(wz, nh)
        anchor = np.stack(np.broadcast_arrays(alpha * v1, -beta * v1,
                                              float(z) / 2.0 + 0.0 * v1), axis=-1)
        c0 = _dot(anchor - x00, nh)
    return c1, c0, j0


def solve_tangency(family: cf.ConfocalFamily, z, u0, v0, v1,
                   eps_coeff: float = EPS_COEFF, strict: bool = True) -> TangencyConfig:
    """Solve (V_0^1)^T N_hat_0^0 = 0 for u1 given (u0, v0, v1).

    Returns a config with status "at_infinity" (hyperboloid) when the
    u1-coefficient nearly vanishes, "ruling_line" when the equation is
    identically zero (z = 0 with v1 = v0: the whole ruling lies in the
    tangent plane), and raises NoSolutionError when it degenerates to a
    nonzero constant on the paraboloid.  With strict=False degenerate
    paraboloid entries are marked +inf instead of raising (the transport
    reports them node-wise).
    """
    family.check_z(z)
    c1, c0, j0 = tangency_coefficients(family, z, u0, v0, v1)
    x00, nh = j0.x, j0.N_hat
    nrm = np.linalg.norm(nh, axis=-1) * (np.linalg.norm(x00, axis=-1) + 1.0)
    small1 = np.abs(c1) <= eps_coeff * np.maximum(nrm, 1.0)
    small0 = np.abs(c0) <= 1e-10 * np.maximum(nrm, 1.0)

    if np.ndim(c1) == 0:
        if small1 and small0:
            status = STATUS_RULING_LINE
            u1 = np.asarray(np.inf)
        elif small1:
            if family.kind != cf.HYPERBOLOID and strict:
                raise NoSolutionError("tangency equation degenerated to a nonzero constant")
            status = STATUS_AT_INFINITY
            u1 = np.asarray(np.inf)
        else:
            status = STATUS_FINITE
            u1 = -c0 / c1
    else:
        if np.any(small1) and family.kind != cf.HYPERBOLOID \
                and np.any(small1 & ~small0) and strict:
            raise NoSolutionError("tangency equation degenerated on some samples")
        status = STATUS_FINITE if not np.any(small1) else STATUS_AT_INFINITY
        with np.errstate(divide="ignore", invalid="ignore"):
            u1 = np.where(small1, np.inf, -c0 / np.where(small1, 1.0, c1))
    return _build_config(family, z, u0, v0, v1, u1, status, j0)


def with_free_u1(family: cf.ConfocalFamily, z, u0, v0, v1, u1) -> TangencyConfig:
    """Configuration with caller-forced u1 (tangency not imposed)."""
    j0 = cf.evaluate(family, 0.0, u0, v0)
    return _build_config(family, z, u0, v0, v1, np.asarray(u1, float),
                         STATUS_FORCED, j0)


def _build_config(family, z, u0, v0, v1, u1, status, j0) -> TangencyConfig:
    u0 = np.asarray(u0, float)
    v0 = np.asarray(v0, float)
    v1 = np.asarray(v1, float)
    u1 = np.asarray(u1, float)
    inf_mask = ~np.isfinite(u1)
    if np.ndim(u1) == 0:
        if inf_mask:
            xz1 = cf.evaluate_at_infinity(family, z, v1)
            xz_v1 = _limit_chart_v_partial(family, z, v1)
            B1 = np.asarray(np.inf)
        else:
            j1 = cf.evaluate(family, z, u1, v1)
            xz1, xz_v1 = j1.x, j1.x_v
            B1 = cf.B_factor(family, u1, v1)
    else:
        if np.any(inf_mask):
            u1_safe = np.where(inf_mask, v1 + 1.0, u1)
            j1 = cf.evaluate(family, z, u1_safe, v1)
            if family.kind == cf.HYPERBOLOID:
                lim_pt = cf.evaluate_at_infinity(family, z, v1)
                lim_dv = _limit_chart_v_partial(family, z, v1)
            else:
                # no limit chart on the paraboloid: mark the entries unusable
                lim_pt = np.full(j1.x.shape, np.nan)
                lim_dv = np.full(j1.x.shape, np.nan)
            xz1 = np.where(inf_mask[..., None], lim_pt, j1.x)
            xz_v1 = np.where(inf_mask[..., None], lim_dv, j1.x_v)
            B1 = np.where(inf_mask, np.inf, cf.B_factor(family, u1_safe, v1))
        else:
            j1 = cf.evaluate(family, z, u1, v1)
            xz1, xz_v1 = j1.x, j1.x_v
            B1 = cf.B_factor(family, u1, v1)
    return TangencyConfig(
        family=family, z=float(z), u0=u0, v0=v0, v1=v1, u1=u1, status=status,
        x00=j0.x, N00=j0.N, Nhat00=j0.N_hat,
        xz1=xz1, V01=xz1 - j0.x, B1=B1,
        wz_u1=cf.u_ruling(family, z, v1), xz_v1=xz_v1,
    )


def _limit_chart_v_partial(family: cf.ConfocalFamily, z, v1) -> np.ndarray:
    """d/dv of the u-at-infinity chart point (-alpha v, beta v, gamma)."""
    alpha, beta, _ = family.level_constants(z)
    v1 = np.asarray(v1, float)
    return np.stack(np.broadcast_arrays(-alpha + 0.0 * v1, beta + 0.0 * v1,
                                        0.0 * v1), axis=-1)


def m_field(config: TangencyConfig, which: str = M_FAMILY) -> MField:
    """Normal field of the facet distribution and its analytic t-partial.

    Evaluated through the quadratic coefficients, so it is finite for any
    state value and structurally independent of the solved parameter.
    """
    t = config.v1 if which == M_FAMILY else config.u1
    if which == MPRIME_FAMILY and np.any(~np.isfinite(np.asarray(t, float))):
        raise DomainError("m' requires a finite u1 state")
    c2, c1, c0 = m_coefficients(config.family, config.z, config.x00, which)
    t = np.asarray(t, float)[..., None]
    m = (c2 * t + c1) * t + c0
    m_t = 2.0 * c2 * t + c1
    return MField(m=m, m_v1=m_t, family=which)


def reflection_residual(config: TangencyConfig, which: str = M_FAMILY) -> np.ndarray:
    """|r^T (I - 2 N N^T) m| / (|r| |m|) with r the other-family ruling velocity.

    r = x_{z,v1} for family m, x_{z,u1} (B_1-scaled) for family m'; the facet
    plane and its mirror in the base tangent plane both contain it only in
    the tangency configuration.
    """
    N = config.N00
    if which == M_FAMILY:
        r = config.xz_v1
    else:
        r = config.wz_u1
    m = m_field(config, which).m
    refl = r - 2.0 * _dot(r, N)[..., None] * N
    num = np.abs(_dot(refl, m))
    den = np.linalg.norm(r, axis=-1) * np.linalg.norm(m, axis=-1)
    return num / np.maximum(den, 1e-300)


def factorization_residual(config: TangencyConfig) -> tuple[np.ndarray, np.ndarray]:
    """(residual, lhs) of 4 (B_1 x_{z,u1})^T N N^T x_{z,v1} = -4z.

    Stated in the B_1-scaled form so both sides stay finite on the
    u1-at-infinity chart.  residual = |lhs - rhs| / max(|lhs|, |rhs|, 1).
    """
    N = config.N00
    lhs = 4.0 * _dot(config.wz_u1, N) * _dot(N, config.xz_v1)
    rhs = -4.0 * config.z * np.ones_like(lhs)
    res = np.abs(lhs - rhs) / np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), 1.0)
    return res, lhs


def integrability_residual(config: TangencyConfig, which: str = M_FAMILY) -> np.ndarray:
    """Normalized |N^T (2z m + m x m_t)|; the transport's total-integrability form."""
    mf = m_field(config, which)
    term = 2.0 * config.z * mf.m + np.cross(mf.m, mf.m_v1)
    den = 2.0 * abs(config.z) * np.linalg.norm(mf.m, axis=-1) \
        + np.linalg.norm(np.cross(mf.m, mf.m_v1), axis=-1)
    return np.abs(_dot(config.N00, term)) / np.maximum(den, 1e-300)


def solve_tangency_mirror(family: cf.ConfocalFamily, z, u0, v0, u1,
                          eps_coeff: float = EPS_COEFF, strict: bool = True):
    """Solve the tangency relation for v1 given (u0, v0, u1).

    Mirrored conventions of the m' family (state u1).  Returns
    (v1, status) with v1 = +inf routed to the limit chart.
    """
    family.check_z(z)
    alpha, beta, gamma = family.level_constants(z)
    j0 = cf.evaluate(family, 0.0, u0, v0)
    x00, nh = j0.x, j0.N_hat
    u1 = np.asarray(u1, float)
    if family.kind == cf.HYPERBOLOID:
        lim = cf.point_at_v_infinity(family, z, u1)
        c1 = -_dot(lim - x00, nh)
        const = np.stack(np.broadcast_arrays(alpha + 0.0 * u1, beta + 0.0 * u1,
                                             gamma * u1), axis=-1)
        c0 = _dot(const, nh) - u1 * _dot(x00, nh)
    else:
        wz = cf.v_ruling(family, z, u1)
        c1 = _dot(wz, nh)
        anchor = np.stack(np.broadcast_arrays(alpha * u1, beta * u1,
                                              float(z) / 2.0 + 0.0 * u1), axis=-1)
        c0 = _dot(anchor - x00, nh)
    nrm = np.maximum(np.linalg.norm(nh, axis=-1) * (np.linalg.norm(x00, axis=-1) + 1.0), 1.0)
    small1 = np.abs(c1) <= eps_coeff * nrm
    small0 = np.abs(c0) <= 1e-10 * nrm
    if np.ndim(c1) == 0:
        if small1 and small0:
            return np.asarray(np.inf), STATUS_RULING_LINE
        if small1:
            if family.kind != cf.HYPERBOLOID and strict:
                raise NoSolutionError("mirror tangency equation degenerated")
            return np.asarray(np.inf), STATUS_AT_INFINITY
        return -c0 / c1, STATUS_FINITE
    if np.any(small1):
        if family.kind != cf.HYPERBOLOID and np.any(small1 & ~small0) and strict:
            raise NoSolutionError("mirror tangency equation degenerated on some samples")
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(small1, np.inf, -c0 / np.where(small1, 1.0, c1)), STATUS_AT_INFINITY
    return -c0 / c1, STATUS_FINITE
