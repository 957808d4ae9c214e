import numpy as np
import pytest

from quadroll import bending as bd
from quadroll import confocal as cf
from quadroll import rolling as rl
from quadroll.errors import QuadratureError, ValidityError

HYP_BOUNDS = (1.4, 2.0, -0.6, 0.0)
PAR_BOUNDS = (-0.4, 0.4, -0.4, 0.4)


def second_form(patch):
    e = np.einsum("...i,...i->...", patch.N, patch.x_uu)
    f = np.einsum("...i,...i->...", patch.N, patch.x_uv)
    g = np.einsum("...i,...i->...", patch.N, patch.x_vv)
    return e, f, g


def test_identity_bending_recovers_base(hyp):
    grid = rl.Grid2D.from_bounds(*HYP_BOUNDS, 15, 15)
    base = rl.quadric_patch(hyp, 0.0, grid)
    kap = bd.base_curvature(hyp, 1.7)
    spec = bd.RuledBendingSpec(hyp, 1.7, kap, 1)
    bent = bd.bend(spec, grid, steps=2048)
    assert bd.isometry_residual(base, bent) <= 1e-10
    # same frame/initial data: the bent patch reproduces the base outright
    assert np.abs(bent.x - base.x).max() <= 1e-11


def test_perturbed_bending_isometric_not_congruent(families):
    for fam, bounds, uref in ((None, HYP_BOUNDS, 1.7), (None, PAR_BOUNDS, 0.0)):
        pass
    for fam, bounds, uref in [(families["hyperboloid"], HYP_BOUNDS, 1.7),
                              (families["paraboloid"], PAR_BOUNDS, 0.0)]:
        grid = rl.Grid2D.from_bounds(*bounds, 15, 15)
        base = rl.quadric_patch(fam, 0.0, grid)
        kap = bd.base_curvature(fam, uref)
        spec = bd.RuledBendingSpec(fam, uref, lambda v: kap(v) + 0.1, 1)
        bent = bd.bend(spec, grid, steps=2048)
        assert bd.isometry_residual(base, bent) <= 1e-8
        d0 = np.stack(second_form(base))
        d1 = np.stack(second_form(bent))
        assert np.abs(d0 - d1).max() >= 1e-2


def test_mirror_branch_same_first_form(hyp):
    grid = rl.Grid2D.from_bounds(*HYP_BOUNDS, 15, 15)
    base = rl.quadric_patch(hyp, 0.0, grid)
    kap = bd.base_curvature(hyp, 1.7)
    for sigma in (1, -1):
        spec = bd.RuledBendingSpec(hyp, 1.7, lambda v: kap(v) + 0.1, sigma)
        bent = bd.bend(spec, grid, steps=2048)
        assert bd.isometry_residual(base, bent) <= 1e-8
    plus = bd.bend(bd.RuledBendingSpec(hyp, 1.7, lambda v: kap(v) + 0.1, 1), grid, 2048)
    minus = bd.bend(bd.RuledBendingSpec(hyp, 1.7, lambda v: kap(v) + 0.1, -1), grid, 2048)
    assert np.abs(plus.x - minus.x).max() >= 1e-3   # genuinely different branch


def test_first_form_residual_uniform_in_u(hyp):
    # the residual along a ruling is constant: only v-data are integrated
    grid = rl.Grid2D.from_bounds(1.4, 3.4, -0.6, 0.0, 17, 9)
    base = rl.quadric_patch(hyp, 0.0, grid)
    kap = bd.base_curvature(hyp, 1.7)
    spec = bd.RuledBendingSpec(hyp, 1.7, lambda v: kap(v) + 0.1, 1)
    bent = bd.bend(spec, grid, steps=2048)
    E0, F0, G0 = rl.first_form(base)
    E1, F1, G1 = rl.first_form(bent)
    dE = np.abs(E1 - E0)
    spread = (dE.max(axis=0) - dE.min(axis=0))   # per fixed v across all u
    assert spread.max() <= 1e-12


def test_frame_orthonormal_along_integration(hyp):
    kap = bd.base_curvature(hyp, 1.7)
    spec = bd.RuledBendingSpec(hyp, 1.7, lambda v: kap(v) + 0.2, 1)
    seed = bd.BentSeed(spec, -0.6, 0.0, steps=1024)
    st = seed.frame.states
    w, n = st[:, 0:3], st[:, 3:6]
    assert np.abs(np.linalg.norm(w, axis=1) - 1.0).max() <= 1e-10
    assert np.abs(np.linalg.norm(n, axis=1) - 1.0).max() <= 1e-10
    assert np.abs(np.einsum("ki,ki->k", w, n)).max() <= 1e-10


def test_bent_jets_match_finite_differences(par):
    kap = bd.base_curvature(par, 0.0)
    spec = bd.RuledBendingSpec(par, 0.0, lambda v: kap(v) + 0.15, 1)
    seed = bd.BentSeed(spec, -0.4, 0.4, steps=2048)
    u0, v0, h = 0.17, -0.11, 1e-5
    j = seed.jets(u0, v0)
    du = (seed.jets(u0 + h, v0).x - seed.jets(u0 - h, v0).x) / (2 * h)
    dv = (seed.jets(u0, v0 + h).x - seed.jets(u0, v0 - h).x) / (2 * h)
    assert np.abs(du - j.x_u).max() <= 1e-9
    assert np.abs(dv - j.x_v).max() <= 1e-9
    dvv = (seed.jets(u0, v0 + h).x_v - seed.jets(u0, v0 - h).x_v) / (2 * h)
    assert np.abs(dvv - j.x_vv).max() <= 1e-8


def test_validity_error_wrong_side(hyp):
    # u_ref and the grid must sit on one side of the chart diagonal
    kap = bd.base_curvature(hyp, 1.7)
    spec = bd.RuledBendingSpec(hyp, 1.7, kap, 1)
    grid = rl.Grid2D.from_bounds(-2.0, -1.4, -0.6, 0.0, 9, 9)
    with pytest.raises(ValidityError):
        bd.bend(spec, grid, steps=256)


def test_quadrature_error_on_blowup(hyp):
    def kap(v):
        with np.errstate(divide="ignore"):
            return 1.0 / (np.asarray(v, float) + 0.3)   # pole inside the v-range

    spec = bd.RuledBendingSpec(hyp, 1.7, kap, 1)
    grid = rl.Grid2D.from_bounds(*HYP_BOUNDS, 9, 9)
    with pytest.raises(QuadratureError):
        bd.bend(spec, grid, steps=256)
