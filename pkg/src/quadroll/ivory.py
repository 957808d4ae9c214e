"""Static identities between corresponding point pairs on confocal quadrics.

For points p0, p1 with x_0^i on the z=0 member and x_z^i their Ivory images,
the segment vectors are V_0^1 = x_z^1 - x_0^0 and V_1^0 = x_z^0 - x_0^1.
The residual operations below measure, for admissible configurations:

  * equality of segment lengths |V_0^1| = |V_1^0| and their closed form,
  * the segment/ruling angle relation (V_0^1)^T w_0^0 + (V_1^0)^T w_z^0 = 0,
  * the ruling/ruling relation (w_0^0)^T w_z^1 = (w_z^0)^T w_0^1,
  * the tangency symmetry (V_0^1)^T N_hat_0^0 = (V_1^0)^T N_hat_0^1,
  * equality of the Gram matrices of (V_0^1, w_0^0, w_z^1) and
    (-V_1^0, w_z^0, w_0^1),

and `build_ivory_motion` constructs the rigid motion mapping
(x_0^0, x_z^1, w_0^0, w_z^1) to (x_z^0, x_0^1, w_z^0, w_0^1).

All operations broadcast over leading axes so sweeps run vectorized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import confocal as cf
from .errors import DegenerateFrameError

COND_LIMIT = 1e8


@dataclass
class PointPair:
    """Two parameter points at a common spectral level, with cached geometry."""

    family: cf.ConfocalFamily
    z: float
    u0: np.ndarray
    v0: np.ndarray
    u1: np.ndarray
    v1: np.ndarray
    x00: np.ndarray
    x01: np.ndarray
    xz0: np.ndarray
    xz1: np.ndarray
    V01: np.ndarray
    V10: np.ndarray
    Nhat00: np.ndarray
    Nhat01: np.ndarray


def make_pair(family: cf.ConfocalFamily, z, u0, v0, u1, v1) -> PointPair:
    x00 = cf.evaluate(family, 0.0, u0, v0).x
    x01 = cf.evaluate(family, 0.0, u1, v1).x
    xz0 = cf.ivory_map(family, z, x00)
    xz1 = cf.ivory_map(family, z, x01)
    return PointPair(
        family=family, z=z,
        u0=np.asarray(u0, float), v0=np.asarray(v0, float),
        u1=np.asarray(u1, float), v1=np.asarray(v1, float),
        x00=x00, x01=x01, xz0=xz0, xz1=xz1,
        V01=xz1 - x00, V10=xz0 - x01,
        Nhat00=cf.normal_scaled(family, 0.0, x00),
        Nhat01=cf.normal_scaled(family, 0.0, x01),
    )


def _rulings(pair: PointPair, fam0: str, fam1: str):
    """z=0 rulings at both points and their Ivory images at level z."""
    family = pair.family
    w00 = cf.ruling_direction(family, 0.0, pair.u0, pair.v0, fam0)
    w01 = cf.ruling_direction(family, 0.0, pair.u1, pair.v1, fam1)
    wz0 = cf.ivory_ruling(family, pair.z, w00)
    wz1 = cf.ivory_ruling(family, pair.z, w01)
    return w00, w01, wz0, wz1


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def ivory_length_residual(pair: PointPair) -> np.ndarray:
    """max of | |V01|^2 - |V10|^2 | and each side's deviation from the
    closed middle expression |x00 + x01 - C(z)|^2 - 2 x00^T (I + sqrt(Rz)) x01 + zC."""
    fam = pair.family
    d1 = _dot(pair.V01, pair.V01)
    d2 = _dot(pair.V10, pair.V10)
    s = fam.sqrt_Rz(pair.z)
    w = pair.x00 + pair.x01 - fam.C_of_z(pair.z)
    mid = _dot(w, w) - 2.0 * _dot(pair.x00, pair.x01 + s * pair.x01) \
        + np.asarray(pair.z, float) * fam.C_const
    return np.maximum(np.abs(d1 - d2), np.maximum(np.abs(d1 - mid), np.abs(d2 - mid)))


def ivory_length_scale(pair: PointPair) -> np.ndarray:
    return np.maximum(_dot(pair.V01, pair.V01), 1.0)


def ruling_length_residual(pair: PointPair, fam0: str = cf.U_FAMILY) -> np.ndarray:
    """| |w_z|^2 - |w_0|^2 | at p0; zero since rulings are asymptotic."""
    w00, _, wz0, _ = _rulings(pair, fam0, fam0)
    return np.abs(_dot(wz0, wz0) - _dot(w00, w00))


def segment_ruling_angle_residual(pair: PointPair, fam: str = cf.U_FAMILY) -> np.ndarray:
    """| (V01)^T w00 + (V10)^T wz0 |; the closed form is -z N_hat^T w = 0."""
    w00, _, wz0, _ = _rulings(pair, fam, fam)
    return np.abs(_dot(pair.V01, w00) + _dot(pair.V10, wz0))


def ruling_angle_residual(pair: PointPair, fam0: str = cf.U_FAMILY,
                          fam1: str = cf.U_FAMILY) -> np.ndarray:
    """| (w00)^T wz1 - (wz0)^T w01 |."""
    w00, w01, wz0, wz1 = _rulings(pair, fam0, fam1)
    return np.abs(_dot(w00, wz1) - _dot(wz0, w01))


def tangency_symmetry_residual(pair: PointPair) -> np.ndarray:
    """| (V01)^T N_hat00 - (V10)^T N_hat01 |."""
    return np.abs(_dot(pair.V01, pair.Nhat00) - _dot(pair.V10, pair.Nhat01))


def gram_residual(pair: PointPair, fam0: str = cf.U_FAMILY,
                  fam1: str = cf.U_FAMILY) -> np.ndarray:
    """Max-abs entry of G1 - G2 for the two mapped triples."""
    S, D = _frames(pair, fam0, fam1)
    G1 = np.einsum("...ki,...kj->...ij", S, S)
    G2 = np.einsum("...ki,...kj->...ij", D, D)
    return np.abs(G1 - G2).max(axis=(-1, -2))


def gram_scale(pair: PointPair, fam0: str = cf.U_FAMILY,
               fam1: str = cf.U_FAMILY) -> np.ndarray:
    S, _ = _frames(pair, fam0, fam1)
    G1 = np.einsum("...ki,...kj->...ij", S, S)
    return np.maximum(np.abs(G1).max(axis=(-1, -2)), 1.0)


def _frames(pair: PointPair, fam0: str, fam1: str):
    w00, w01, wz0, wz1 = _rulings(pair, fam0, fam1)
    S = np.stack([pair.V01, w00, wz1], axis=-1)
    D = np.stack([-pair.V10, wz0, w01], axis=-1)
    return S, D


@dataclass
class RigidMotion:
    """Orthogonal matrix plus translation; det_sign tracks the reflection flavor."""

    R: np.ndarray
    t: np.ndarray
    det_sign: np.ndarray

    def apply(self, x) -> np.ndarray:
        return np.einsum("...ij,...j->...i", self.R, np.asarray(x, float)) + self.t

    def apply_vector(self, w) -> np.ndarray:
        return np.einsum("...ij,...j->...i", self.R, np.asarray(w, float))


def _polar(R: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(R)
    return U @ Vt


def build_ivory_motion(pair: PointPair, fam0: str = cf.U_FAMILY,
                       fam1: str = cf.U_FAMILY,
                       cond_limit: float = COND_LIMIT) -> RigidMotion:
    """Rigid motion with R [V01 w00 wz1] = [-V10 wz0 w01] and t = xz0 - R x00.

    R comes from the 3x3 solve re-orthogonalized by polar projection.  The
    V01 = 0 configuration (z = 0 with coincident points) is completed by
    continuity: identity for equal ruling families, tangent-plane reflection
    for opposite ones.  Anything else rank-deficient raises
    DegenerateFrameError.
    """
    S, D = _frames(pair, fam0, fam1)
    if S.ndim == 2:
        R = _motion_rotation_single(pair, S, D, fam0, fam1, cond_limit)
    else:
        cond = np.linalg.cond(S)
        if np.any(cond > cond_limit):
            raise DegenerateFrameError(
                f"{int(np.count_nonzero(cond > cond_limit))} frame(s) exceed "
                f"condition limit {cond_limit:g}"
            )
        R = _polar(np.linalg.solve(np.swapaxes(S, -1, -2), np.swapaxes(D, -1, -2)))
        R = np.swapaxes(R, -1, -2)
    t = pair.xz0 - np.einsum("...ij,...j->...i", R, pair.x00)
    det = np.linalg.det(R)
    return RigidMotion(R=R, t=t, det_sign=np.where(det >= 0.0, 1, -1))


def _motion_rotation_single(pair, S, D, fam0, fam1, cond_limit):
    cond = np.linalg.cond(S)
    if cond <= cond_limit:
        Rt = np.linalg.solve(S.T, D.T)
        return _polar(Rt.T)
    # Rank-deficient: only realizable with V01 ~ 0, i.e. z = 0 and p1 = p0.
    V01, w00, wz1 = S[:, 0], S[:, 1], S[:, 2]
    wz0, w01 = D[:, 1], D[:, 2]
    vscale = np.linalg.norm(pair.x00) + np.linalg.norm(pair.xz1) + 1.0
    if np.linalg.norm(V01) > 1e-9 * vscale:
        raise DegenerateFrameError(f"frame condition number {cond:.2e} exceeds limit")
    cross_s = np.cross(w00, wz1)
    if np.linalg.norm(cross_s) <= 1e-10 * np.linalg.norm(w00) * np.linalg.norm(wz1):
        # Same ruling through the coincident point: identity by continuity.
        return np.eye(3)
    sign = 1.0 if fam0 == fam1 else -1.0
    S2 = np.stack([w00, wz1, cross_s], axis=-1)
    D2 = np.stack([wz0, w01, sign * np.cross(wz0, w01)], axis=-1)
    return _polar(np.linalg.solve(S2.T, D2.T).T)


def motion_map_residual(pair: PointPair, motion: RigidMotion, fam0: str = cf.U_FAMILY,
                        fam1: str = cf.U_FAMILY) -> np.ndarray:
    """Worst residual of the four mapped items of the defining quadruple."""
    w00, w01, wz0, wz1 = _rulings(pair, fam0, fam1)
    r = [
        motion.apply(pair.x00) - pair.xz0,
        motion.apply(pair.xz1) - pair.x01,
        motion.apply_vector(w00) - wz0,
        motion.apply_vector(wz1) - w01,
    ]
    return np.max(np.stack([np.linalg.norm(e, axis=-1) for e in r], axis=-1), axis=-1)


def orthogonality_residual(motion: RigidMotion) -> np.ndarray:
    RtR = np.einsum("...ki,...kj->...ij", motion.R, motion.R)
    return np.abs(RtR - np.eye(3)).max(axis=(-1, -2))
