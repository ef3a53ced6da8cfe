import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_correlation
from rmtcompound import moments as mo
from rmtcompound.correlation import SpectralDecomp, eigendecompose
from rmtcompound.errors import ExistenceError, ParamError, UnsupportedError
from rmtcompound.model_dists import FAMILIES, ModelParams
from rmtcompound.sampler import SeededRng, draw_compound

ONE = mo.MomentSpec(1.0)
TWO = mo.MomentSpec(2.0)


@pytest.mark.parametrize("K", [1, 2, 7, 479])
def test_first_moment_is_K(K):
    assert mo.epoch_moment(ONE, ModelParams("G", "G", K)) == pytest.approx(K, rel=1e-13)
    for family in FAMILIES:
        p = ModelParams.rotated(family, 3.0, 4.0, 9.0, K=K)
        assert mo.long_moment(ONE, p) == pytest.approx(K, rel=1e-12)


def test_moment_examples():
    assert mo.epoch_moment(ONE, ModelParams("A", "G", 2, l=4.0)) == pytest.approx(2.0, rel=1e-14)
    with pytest.raises(ExistenceError):
        mo.epoch_moment(mo.MomentSpec(3.0), ModelParams("A", "G", 2, l=4.0))
    gg = ModelParams("G", "G", 5, 4.0)
    expect = math.gamma(4.5) * math.gamma(4) / (math.gamma(2.5) * math.gamma(2))
    assert mo.long_moment(TWO, gg) == pytest.approx(expect, rel=1e-13)
    assert expect == pytest.approx(52.5)


def test_ratio_examples():
    assert mo.moment_ratio_q2(ModelParams("G", "G", 2), "epoch") == pytest.approx(2.0, rel=1e-15)
    assert mo.moment_ratio_q2(ModelParams("G", "G", 5, 4.0)) == pytest.approx(2.1, rel=1e-15)
    big = ModelParams.from_family("AA", 479, 3.123, l=241.601, L=338.607)
    q2 = mo.moment_ratio_q2(big)
    assert math.isfinite(mo.long_moment(TWO, big))
    assert q2 == pytest.approx(mo.long_moment(TWO, big) / mo.long_moment(ONE, big) ** 2, rel=1e-12)


def test_errors():
    with pytest.raises(ParamError):
        mo.MomentSpec(0.0)
    with pytest.raises(ParamError):
        mo.MomentSpec(1.0, "short")
    with pytest.raises(UnsupportedError):
        mo.long_moment(ONE, ModelParams("G", "G", 2, 2.0, d_eigs=(1.0, 2.0)))
    with pytest.raises(ExistenceError):
        mo.moment_ratio_q2(ModelParams.rotated("GA", 3.0, L_rot=3.2))


params = st.builds(
    lambda fam, K, N, l_rot, L_rot: ModelParams.rotated(fam, N, 2.55 + l_rot, (N + 4) / 2 + L_rot, K=K),
    st.sampled_from(FAMILIES), st.integers(1, 50), st.floats(0.5, 40), st.floats(0.01, 300), st.floats(0.01, 300))


@given(params)
def test_ratio_equals_moment_quotient(p):
    for scope in ("epoch", "long"):
        spec1, spec2 = mo.MomentSpec(1.0, scope), mo.MomentSpec(2.0, scope)
        direct = mo.moment(spec2, p) / mo.moment(spec1, p) ** 2
        assert mo.moment_ratio_q2(p, scope) == pytest.approx(direct, rel=1e-12)


def test_family_factorization():
    g = np.random.default_rng(5)
    for _ in range(50):
        K, N = int(g.integers(1, 30)), g.uniform(0.5, 20)
        l_rot, L_rot = 2.6 + g.uniform(0, 50), (N + 4) / 2 + g.uniform(0, 50)
        q = {f: mo.moment_ratio_q2(ModelParams.rotated(f, N, l_rot, L_rot, K=K)) for f in FAMILIES}
        assert q["AA"] == pytest.approx(q["GG"] * (q["AG"] / q["GG"]) * (q["GA"] / q["GG"]), rel=1e-13)


def test_limits():
    gg = mo.moment_ratio_q2(ModelParams("G", "G", 5, 6.0))
    assert mo.moment_ratio_q2(ModelParams.from_family("AG", 5, 6.0, l=1e6)) == pytest.approx(gg, rel=1e-4)
    assert mo.moment_ratio_q2(ModelParams.from_family("GA", 5, 6.0, L=1e6)) == pytest.approx(gg, rel=1e-4)


def test_empirical_basics(rng):
    sd = SpectralDecomp.identity(3)
    assert mo.empirical_moment(np.zeros((10, 3)), sd, 1.0).value == 0.0
    c = random_correlation(rng, 4)
    x = rng.standard_normal((200_000, 4)) @ np.linalg.cholesky(c).T
    m = mo.empirical_moment(x, eigendecompose(c), 1.0)
    assert abs(m.value - 4) < 3 * m.stderr


def test_compound_moments_and_c_independence(rng):
    p = ModelParams("G", "G", 5, 4.0)
    sds = [SpectralDecomp.identity(5), eigendecompose(random_correlation(rng, 5))]
    vals = []
    for i, sd in enumerate(sds):
        r = draw_compound(p, sd, 400_000, SeededRng(10 + i))
        m = mo.empirical_moment(r, sd, 2.0)
        assert abs(m.value - mo.long_moment(TWO, p)) < 3 * m.stderr
        vals.append(m)
    assert abs(vals[0].value - vals[1].value) < 3 * math.hypot(vals[0].stderr, vals[1].stderr)
