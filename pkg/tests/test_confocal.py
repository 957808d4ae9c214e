import numpy as np
import pytest

from quadroll import confocal as cf
from quadroll.errors import DomainError, KindError

from conftest import sample_uv


def test_hyperboloid_point_example(hyp):
    j = cf.evaluate(hyp, 0.0, 1.0, 0.0)
    assert np.allclose(j.x, [2.0, 1.0, 1.0], atol=1e-15)
    assert abs(cf.implicit_residual(hyp, 0.0, j.x)) <= 1e-12


def test_paraboloid_point_examples(par):
    j = cf.evaluate(par, 0.0, 1.0, 2.0)
    assert np.allclose(j.x, [3.0, -1.0, 4.0], atol=1e-15)
    # x1^2/a1 + x2^2/a2 - 2 x3 = 0
    assert abs(9.0 / 1.0 + 1.0 / (-1.0) - 8.0) == 0.0
    j2 = cf.evaluate(par, 0.5, 1.0, 2.0)
    expected = np.array([3.0 * np.sqrt(0.5), -np.sqrt(1.5), 4.25])
    assert np.allclose(j2.x, expected, atol=1e-14)
    # cross-check against the Ivory image of the z=0 point
    assert np.allclose(cf.ivory_map(par, 0.5, j.x), j2.x, atol=1e-14)


def test_u_at_infinity(hyp, par):
    assert np.allclose(cf.evaluate_at_infinity(hyp, 0.0, 0.0), [0.0, 0.0, 1.0])
    assert np.allclose(cf.evaluate_at_infinity(hyp, 0.0, 1.0), [-2.0, 1.0, 1.0])
    v = np.linspace(-2, 2, 9)
    for z in (0.0, 0.4, -0.7):
        pts = cf.evaluate_at_infinity(hyp, z, v)
        assert np.abs(cf.implicit_residual(hyp, z, pts)).max() <= 1e-13
    with pytest.raises(KindError):
        cf.evaluate_at_infinity(par, 0.0, 1.0)


def test_ivory_map_examples(hyp):
    x0 = np.array([2.0, 1.0, 1.0])
    assert np.allclose(cf.ivory_map(hyp, 0.0, x0), x0)
    xz = cf.ivory_map(hyp, 0.5, x0)
    assert np.allclose(xz, [np.sqrt(3.5), np.sqrt(1.5), np.sqrt(0.5)], atol=1e-14)
    assert np.allclose(cf.evaluate(hyp, 0.5, 1.0, 0.0).x, xz, atol=1e-14)
    assert np.allclose(cf.ivory_map_inverse(hyp, 0.5, xz), x0, atol=1e-14)


def test_ivory_commutes_with_parametrization(families, rng):
    for fam in families.values():
        u, v = sample_uv(fam, 400, rng)
        lo, hi = fam.z_interval()
        z = rng.uniform(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo), 400)
        x0 = cf.evaluate(fam, 0.0, u, v).x
        xz = cf.evaluate(fam, z, u, v).x
        err = np.abs(cf.ivory_map(fam, z, x0) - xz) / (np.abs(xz) + 1.0)
        assert err.max() <= 1e-12


def test_implicit_residual_values(hyp):
    assert cf.implicit_residual(hyp, 0.0, np.array([2.0, 1.0, 1.0])) == pytest.approx(0.0, abs=1e-14)
    assert cf.implicit_residual(hyp, 0.0, np.zeros(3)) == pytest.approx(-1.0)


def test_implicit_residual_vanishes_on_surface(families, rng):
    for fam in families.values():
        u, v = sample_uv(fam, 500, rng)
        lo, hi = fam.z_interval()
        z = rng.uniform(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo), 500)
        x = cf.evaluate(fam, z, u, v).x
        assert cf.implicit_residual_rel(fam, z, x).max() <= 1e-12


def test_scaled_normal_parallel_to_gradient(families, rng):
    for fam in families.values():
        u, v = sample_uv(fam, 300, rng)
        z = 0.3
        j = cf.evaluate(fam, z, u, v)
        g = cf.implicit_gradient(fam, z, j.x)
        num = np.linalg.norm(np.cross(j.N_hat, g), axis=-1)
        den = np.linalg.norm(j.N_hat, axis=-1) * np.linalg.norm(g, axis=-1)
        assert (num / den).max() <= 1e-10


def test_jet_orthogonality_and_unit_normal(families, rng):
    for fam in families.values():
        u, v = sample_uv(fam, 300, rng)
        j = cf.evaluate(fam, 0.25, u, v)
        rel = np.linalg.norm(j.N_hat, axis=-1) * np.linalg.norm(j.x_u, axis=-1)
        assert (np.abs(np.einsum("...i,...i->...", j.N_hat, j.x_u)) / rel).max() <= 1e-12
        rel = np.linalg.norm(j.N_hat, axis=-1) * np.linalg.norm(j.x_v, axis=-1)
        assert (np.abs(np.einsum("...i,...i->...", j.N_hat, j.x_v)) / rel).max() <= 1e-12
        assert np.abs(np.linalg.norm(j.N, axis=-1) - 1.0).max() <= 1e-14


def test_ruling_direction_examples(hyp, par):
    w = cf.ruling_direction(hyp, 0.0, 1.0, 0.0, "u")
    assert np.allclose(w, [-2.0, -1.0, 0.0])
    # independence of u: identical for u=1 and u=5
    w5 = cf.ruling_direction(hyp, 0.0, 5.0, 0.0, "u")
    assert np.array_equal(w, w5)
    for v in (-1.3, 0.0, 2.0):
        wp = cf.ruling_direction(par, 0.0, 0.7, v, "u")
        assert np.allclose(wp, [1.0, 1.0, 2.0 * v])


def test_ruling_asymptotic_and_tangent(families, rng):
    for fam in families.values():
        u, v = sample_uv(fam, 300, rng)
        z = 0.35
        j = cf.evaluate(fam, z, u, v)
        for which in ("u", "v"):
            w = cf.ruling_direction(fam, z, u, v, which)
            wn = np.einsum("...i,...i->...", w, w)
            quad = np.einsum("...i,...i->...", w * fam.Az_diag(z), w)
            assert (np.abs(quad) / wn).max() <= 1e-12
            tang = np.einsum("...i,...i->...", w, j.N_hat)
            scale = np.linalg.norm(w, axis=-1) * np.linalg.norm(j.N_hat, axis=-1)
            assert (np.abs(tang) / scale).max() <= 1e-12


def test_scaled_ruling_exact_quadratic_in_v(hyp):
    # fit a quadratic through 4 samples; it must reproduce a 5th
    vs = np.array([-1.5, -0.5, 0.3, 1.1])
    v_test = 2.3
    z = 0.25
    W = cf.u_ruling(hyp, z, vs)
    V = np.vander(vs, 3)
    coef, *_ = np.linalg.lstsq(V, W, rcond=None)
    pred = np.vander(np.atleast_1d(v_test), 3) @ coef
    actual = cf.u_ruling(hyp, z, v_test)
    assert np.abs(pred - actual).max() <= 1e-10 * max(1.0, np.abs(actual).max())


def test_ivory_ruling_preserves_length(hyp, rng):
    w0 = np.array([-2.0, -1.0, 0.0])
    wz = cf.ivory_ruling(hyp, 0.5, w0)
    assert np.allclose(wz, [-2.0 * np.sqrt(7 / 8), -np.sqrt(1.5), 0.0])
    assert wz @ wz == pytest.approx(5.0, abs=1e-12)
    u, v = sample_uv(hyp, 400, rng)
    lo, hi = hyp.z_interval()
    z = rng.uniform(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo), 400)
    w0 = cf.ruling_direction(hyp, 0.0, u, v, "u")
    wz = cf.ivory_ruling(hyp, z, w0)
    n0 = np.einsum("...i,...i->...", w0, w0)
    nz = np.einsum("...i,...i->...", wz, wz)
    assert (np.abs(nz - n0) / n0).max() <= 1e-12


def test_finite_difference_convergence(hyp, par):
    # halving h quarters the error in the analytic partials (hyperboloid;
    # the paraboloid's partials are polynomial, so central differences are
    # exact up to rounding there)
    def err(fam, z, u, v, h):
        j = cf.evaluate(fam, z, u, v)
        du = (cf.evaluate(fam, z, u + h, v).x - cf.evaluate(fam, z, u - h, v).x) / (2 * h)
        dv = (cf.evaluate(fam, z, u, v + h).x - cf.evaluate(fam, z, u, v - h).x) / (2 * h)
        return max(np.abs(du - j.x_u).max(), np.abs(dv - j.x_v).max())

    ratio = err(hyp, 0.3, 1.3, -0.4, 2e-3) / err(hyp, 0.3, 1.3, -0.4, 1e-3)
    assert 3.5 <= ratio <= 4.5
    assert err(par, 0.3, 0.7, -1.1, 1e-3) <= 1e-10


def test_domain_errors(hyp, par):
    with pytest.raises(DomainError):
        cf.evaluate(hyp, 0.0, 1.0, 1.0 - 1e-10)     # chart gap
    with pytest.raises(DomainError):
        cf.evaluate(hyp, 1.5, 1.0, 0.0)             # z above min(a1, a3)
    with pytest.raises(DomainError):
        cf.evaluate(par, -1.0, 0.0, 0.0)            # z at a2
    with pytest.raises(DomainError):
        cf.ConfocalFamily("hyperboloid", 4.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        cf.ConfocalFamily("paraboloid", 1.0, -1.0, 1.0)


def test_second_partials_match_fd(families):
    for fam in families.values():
        u, v, z = (1.4, -0.3, 0.2) if fam.kind == "hyperboloid" else (0.4, 0.9, 0.2)
        j = cf.evaluate(fam, z, u, v)
        h = 1e-5
        xuu = (cf.evaluate(fam, z, u + h, v).x_u - cf.evaluate(fam, z, u - h, v).x_u) / (2 * h)
        xuv = (cf.evaluate(fam, z, u, v + h).x_u - cf.evaluate(fam, z, u, v - h).x_u) / (2 * h)
        xvv = (cf.evaluate(fam, z, u, v + h).x_v - cf.evaluate(fam, z, u, v - h).x_v) / (2 * h)
        assert np.abs(xuu - j.x_uu).max() <= 1e-8
        assert np.abs(xuv - j.x_uv).max() <= 1e-8
        assert np.abs(xvv - j.x_vv).max() <= 1e-8
