"""Confocal families of doubly ruled quadrics.

Two families are supported, each parametrized by a spectral value z:

  hyperboloid of one sheet, semiaxes (a1, a2, a3) with a2 < 0 < a1, a3:

      x_z(u, v) = ( sqrt(a1-z) (1-uv),  sqrt(z-a2) (1+uv),
                    sqrt(a3-z) (u+v) ) / (u - v)

  hyperbolic paraboloid, (a1, a2) with a2 < 0 < a1:

      x_z(u, v) = ( sqrt(a1-z) (u+v),  sqrt(z-a2) (u-v),  2uv + z/2 )

The affine map between members ("Ivory affinity") is

      x_z = sqrt(R_z) x_0 + C(z),   R_z = I - z A,

with A = diag(1/a1, 1/a2, 1/a3) resp. diag(1/a1, 1/a2, 0) and C(z) = 0
resp. (z/2) e3.  All partials are hand-derived closed forms so identity
residuals sit at rounding level.  Every function broadcasts over numpy
arrays of parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, KindError

HYPERBOLOID = "hyperboloid"
PARABOLOID = "paraboloid"

# Hyperboloid charts exclude a band around u = v where the parametrization
# blows up.
EPS_DOM = 1e-8

U_FAMILY = "u"
V_FAMILY = "v"


@dataclass(frozen=True)
class ConfocalFamily:
    """A confocal family: quadric kind plus semiaxis constants.

    The bordered-matrix data (A, B, C) of the unified implicit form is
    derived from the kind: (B, C) = (0, -1) for the hyperboloid and
    (-e3, 0) for the paraboloid.
    """

    kind: str
    a1: float
    a2: float
    a3: float | None = None

    def __post_init__(self):
        if self.kind not in (HYPERBOLOID, PARABOLOID):
            raise DomainError(f"unknown quadric kind {self.kind!r}")
        if self.kind == HYPERBOLOID:
            if self.a3 is None:
                raise DomainError("hyperboloid needs three semiaxis constants")
            if not (self.a2 < 0.0 < min(self.a1, self.a3)):
                raise DomainError(
                    f"hyperboloid requires a2 < 0 < a1, a3; got "
                    f"({self.a1}, {self.a2}, {self.a3})"
                )
        else:
            if self.a3 is not None:
                raise DomainError("paraboloid takes only (a1, a2)")
            if not (self.a2 < 0.0 < self.a1):
                raise DomainError(
                    f"paraboloid requires a2 < 0 < a1; got ({self.a1}, {self.a2})"
                )

    # -- bordered-matrix data -------------------------------------------------

    @property
    def A_diag(self) -> np.ndarray:
        if self.kind == HYPERBOLOID:
            return np.array([1.0 / self.a1, 1.0 / self.a2, 1.0 / self.a3])
        return np.array([1.0 / self.a1, 1.0 / self.a2, 0.0])

    @property
    def B_vec(self) -> np.ndarray:
        if self.kind == HYPERBOLOID:
            return np.zeros(3)
        return np.array([0.0, 0.0, -1.0])

    @property
    def C_const(self) -> float:
        return -1.0 if self.kind == HYPERBOLOID else 0.0

    # -- spectral range -------------------------------------------------------

    def z_interval(self) -> tuple[float, float]:
        """Open interval of admissible z (all square roots real)."""
        if self.kind == HYPERBOLOID:
            return self.a2, min(self.a1, self.a3)
        return self.a2, self.a1

    def check_z(self, z) -> None:
        lo, hi = self.z_interval()
        z = np.asarray(z, dtype=float)
        if np.any(z <= lo) or np.any(z >= hi):
            raise DomainError(f"z={z} outside admissible interval ({lo}, {hi})")

    # -- Ivory affinity data --------------------------------------------------

    def sqrt_Rz(self, z) -> np.ndarray:
        """Diagonal of sqrt(R_z) = sqrt(I - zA), shape (..., 3)."""
        self.check_z(z)
        z = np.asarray(z, dtype=float)
        return np.sqrt(1.0 - np.multiply.outer(z, self.A_diag))

    def C_of_z(self, z) -> np.ndarray:
        """Translation part C(z) of the Ivory affinity, shape (..., 3)."""
        z = np.asarray(z, dtype=float)
        out = np.zeros(z.shape + (3,))
        if self.kind == PARABOLOID:
            out[..., 2] = z / 2.0
        return out

    def Az_diag(self, z) -> np.ndarray:
        """Diagonal of A R_z^{-1}: 1/(a_i - z) entries (0 for the flat axis)."""
        self.check_z(z)
        z = np.asarray(z, dtype=float)
        if self.kind == HYPERBOLOID:
            a = np.array([self.a1, self.a2, self.a3])
            return 1.0 / (a - z[..., None])
        inv12 = 1.0 / (np.array([self.a1, self.a2]) - z[..., None])
        return np.concatenate([inv12, np.zeros(z.shape + (1,))], axis=-1)

    def level_constants(self, z):
        """(alpha, beta, gamma) = (sqrt(a1-z), sqrt(z-a2), sqrt(a3-z)).

        gamma is None for the paraboloid.
        """
        self.check_z(z)
        z = np.asarray(z, dtype=float)
        alpha = np.sqrt(self.a1 - z)
        beta = np.sqrt(z - self.a2)
        gamma = np.sqrt(self.a3 - z) if self.kind == HYPERBOLOID else None
        return alpha, beta, gamma


@dataclass
class JetPoint:
    """Point on a parametrized quadric with first/second partials and normals.

    N is the unit normal x_u x x_v / |...|; N_hat the scaled normal
    -2 d/dz x_z = A R_z^{-1} x + R_z^{-1} B, the field the static identities
    are written against.
    """

    x: np.ndarray
    x_u: np.ndarray
    x_v: np.ndarray
    x_uu: np.ndarray
    x_uv: np.ndarray
    x_vv: np.ndarray
    N: np.ndarray = field(default=None)
    N_hat: np.ndarray = field(default=None)


def _stack3(c1, c2, c3) -> np.ndarray:
    return np.stack(np.broadcast_arrays(c1, c2, c3), axis=-1)


def evaluate(family: ConfocalFamily, z, u, v, eps_dom: float = EPS_DOM) -> JetPoint:
    """Closed-form jet of x_z at parameters (u, v); broadcasts over arrays.

    Raises DomainError for inadmissible z, or |u-v| < eps_dom on the
    hyperboloid chart.
    """
    alpha, beta, gamma = family.level_constants(z)
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))

    if family.kind == HYPERBOLOID:
        d = u - v
        if np.any(np.abs(d) < eps_dom):
            raise DomainError(f"|u - v| < {eps_dom} on the hyperboloid chart")
        x = _stack3(alpha * (1.0 - u * v), beta * (1.0 + u * v), gamma * (u + v)) / d[..., None]
        wu = _stack3(alpha * (v * v - 1.0), -beta * (v * v + 1.0), -2.0 * gamma * v)
        wv = _stack3(alpha * (1.0 - u * u), beta * (u * u + 1.0), 2.0 * gamma * u)
        wu_v = _stack3(2.0 * alpha * v, -2.0 * beta * v, -2.0 * gamma + 0.0 * v)
        d2 = (d * d)[..., None]
        d1 = d[..., None]
        x_u = wu / d2
        x_v = wv / d2
        x_uu = -2.0 * x_u / d1
        x_vv = 2.0 * x_v / d1
        x_uv = wu_v / d2 + 2.0 * wu / (d2 * d1)
    else:
        x = _stack3(alpha * (u + v), beta * (u - v), 2.0 * u * v + np.asarray(z, float) / 2.0)
        x_u = _stack3(alpha + 0.0 * v, beta + 0.0 * v, 2.0 * v)
        x_v = _stack3(alpha + 0.0 * u, -beta + 0.0 * u, 2.0 * u)
        x_uu = np.zeros_like(x)
        x_vv = np.zeros_like(x)
        x_uv = np.zeros_like(x) + np.array([0.0, 0.0, 2.0])

    g = np.cross(x_u, x_v)
    N = g / np.linalg.norm(g, axis=-1, keepdims=True)
    return JetPoint(x=x, x_u=x_u, x_v=x_v, x_uu=x_uu, x_uv=x_uv, x_vv=x_vv,
                    N=N, N_hat=normal_scaled(family, z, x))


def evaluate_at_infinity(family: ConfocalFamily, z, v) -> np.ndarray:
    """Limit point lim_{u->inf} x_z(u, v) on the hyperboloid.

    The parametrization covers each ruling line minus one point; this is
    that point for the u-chart.
    """
    if family.kind != HYPERBOLOID:
        raise KindError("u-at-infinity chart exists only on the hyperboloid")
    alpha, beta, gamma = family.level_constants(z)
    v = np.asarray(v, dtype=float)
    return _stack3(-alpha * v, beta * v, gamma + 0.0 * v)


def point_at_v_infinity(family: ConfocalFamily, z, u) -> np.ndarray:
    """lim_{v->inf} x_z(u, v) = -x_z(inf, u) on the hyperboloid."""
    if family.kind != HYPERBOLOID:
        raise KindError("v-at-infinity chart exists only on the hyperboloid")
    alpha, beta, gamma = family.level_constants(z)
    u = np.asarray(u, dtype=float)
    return _stack3(alpha * u, -beta * u, -gamma + 0.0 * u)


def ivory_map(family: ConfocalFamily, z, x0) -> np.ndarray:
    """Ivory affinity x0 -> sqrt(R_z) x0 + C(z) between the z=0 and z members."""
    s = family.sqrt_Rz(z)
    x0 = np.asarray(x0, dtype=float)
    return s * x0 + family.C_of_z(z)


def ivory_map_inverse(family: ConfocalFamily, z, xz) -> np.ndarray:
    s = family.sqrt_Rz(z)
    xz = np.asarray(xz, dtype=float)
    return (xz - family.C_of_z(z)) / s


def ivory_ruling(family: ConfocalFamily, z, w0) -> np.ndarray:
    """Direction map w_z = sqrt(R_z) w0; preserves |w| on asymptotic w0."""
    return family.sqrt_Rz(z) * np.asarray(w0, dtype=float)


def implicit_residual(family: ConfocalFamily, z, x) -> np.ndarray:
    """Bordered form [x;1]^T M(z) [x;1]; zero exactly on the z-member.

    M(z) has blocks (A R_z^{-1}, R_z^{-1} B; B^T R_z^{-1}, C + z B^T R_z^{-1} B).
    """
    family.check_z(z)
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    Az = family.Az_diag(z)
    # R_z^{-1} B: third component of B is the only nonzero one and R_z is
    # the identity on that axis for the paraboloid.
    RzinvB = family.B_vec
    cz = family.C_const + z * float(family.B_vec @ family.B_vec)
    return np.einsum("...i,...i->...", x * Az, x) + 2.0 * (x @ RzinvB) + cz


def implicit_residual_rel(family: ConfocalFamily, z, x) -> np.ndarray:
    """Implicit residual normalized by the magnitude of its terms."""
    x = np.asarray(x, dtype=float)
    Az = family.Az_diag(z)
    scale = np.einsum("...i,...i->...", np.abs(x * Az), np.abs(x)) \
        + 2.0 * np.abs(x @ family.B_vec) + abs(family.C_const) + 1.0
    return np.abs(implicit_residual(family, z, x)) / scale


def implicit_gradient(family: ConfocalFamily, z, x) -> np.ndarray:
    """Gradient of the bordered form: 2 (A R_z^{-1} x + R_z^{-1} B)."""
    x = np.asarray(x, dtype=float)
    return 2.0 * (family.Az_diag(z) * x + family.B_vec)


def normal_scaled(family: ConfocalFamily, z, x) -> np.ndarray:
    """Scaled normal N_hat = -2 d/dz x_z = A R_z^{-1} x + R_z^{-1} B.

    Chart-free: needs only the ambient point, so it works at limit points.
    """
    x = np.asarray(x, dtype=float)
    return family.Az_diag(z) * x + family.B_vec


def B_factor(family: ConfocalFamily, u, v) -> np.ndarray:
    """Ruling scale factor: (u-v)^2 on the hyperboloid, 1 on the paraboloid."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if family.kind == HYPERBOLOID:
        return (u - v) ** 2
    return np.ones(np.broadcast(u, v).shape)


def u_ruling(family: ConfocalFamily, z, v) -> np.ndarray:
    """Scaled u-family ruling direction B x_{z,u}; depends on v only."""
    alpha, beta, gamma = family.level_constants(z)
    v = np.asarray(v, dtype=float)
    if family.kind == HYPERBOLOID:
        return _stack3(alpha * (v * v - 1.0), -beta * (v * v + 1.0), -2.0 * gamma * v)
    return _stack3(alpha + 0.0 * v, beta + 0.0 * v, 2.0 * v)


def v_ruling(family: ConfocalFamily, z, u) -> np.ndarray:
    """Scaled v-family ruling direction B x_{z,v}; depends on u only."""
    alpha, beta, gamma = family.level_constants(z)
    u = np.asarray(u, dtype=float)
    if family.kind == HYPERBOLOID:
        return _stack3(alpha * (1.0 - u * u), beta * (u * u + 1.0), 2.0 * gamma * u)
    return _stack3(alpha + 0.0 * u, -beta + 0.0 * u, 2.0 * u)


def ruling_direction(family: ConfocalFamily, z, u, v, fam: str = U_FAMILY) -> np.ndarray:
    """Scaled ruling B x_{z,u} (u-family) or B x_{z,v} (v-family) at (u, v).

    Asymptotic and tangent: w^T A_z w = 0 and w^T N_hat = 0.
    """
    if family.kind == HYPERBOLOID and np.any(np.abs(np.asarray(u, float) - np.asarray(v, float)) < EPS_DOM):
        raise DomainError("|u - v| below the chart guard")
    if fam == U_FAMILY:
        return u_ruling(family, z, v)
    if fam == V_FAMILY:
        return v_ruling(family, z, u)
    raise DomainError(f"unknown ruling family {fam!r}")
