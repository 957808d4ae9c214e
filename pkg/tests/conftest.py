import numpy as np
import pytest

from quadroll import confocal as cf


@pytest.fixture(scope="session")
def hyp():
    return cf.ConfocalFamily("hyperboloid", 4.0, -1.0, 1.0)


@pytest.fixture(scope="session")
def par():
    return cf.ConfocalFamily("paraboloid", 1.0, -1.0)


@pytest.fixture(scope="session")
def families(hyp, par):
    return {"hyperboloid": hyp, "paraboloid": par}


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


def sample_uv(family, n, rng, lo=-3.0, hi=3.0, gap=0.1):
    """Admissible (u, v) samples, rejecting the hyperboloid chart gap."""
    out = []
    got = 0
    while got < n:
        u, v = rng.uniform(lo, hi, (2, 2 * n))
        if family.kind == cf.HYPERBOLOID:
            ok = np.abs(u - v) >= gap
            u, v = u[ok], v[ok]
        out.append((u, v))
        got += len(u)
    u = np.concatenate([a for a, _ in out])[:n]
    v = np.concatenate([b for _, b in out])[:n]
    return u, v
