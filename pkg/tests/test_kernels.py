import os
import subprocess
import sys

import numpy as np
import pytest
from scipy import integrate

from rmtcompound import _kernels_py as pure
from rmtcompound import kernels

compiled = pytest.importorskip("rmtcompound._kernels")


def _cases(g, n=300):
    return [
        (g.uniform(-0.9, 40, n), g.uniform(-0.9, 40, n), g.uniform(-60, 0, n), g.uniform(0, 50, n), 0.0, 0.0),
        (g.uniform(-0.5, 10, n), g.uniform(-5, 5, n), 0.0, 1.0, -g.uniform(0.01, 100, n), 0.0),
        (g.uniform(0, 20, n), g.uniform(0, 20, n), 0.0, 1.0, 0.0, g.uniform(-150, 150, n)),
    ]


def test_beta_integral_backends_agree():
    g = np.random.default_rng(8)
    for args in _cases(g):
        lp, ep = pure.log_beta_integral(*args)
        lc, ec = compiled.log_beta_integral(*args)
        assert np.all(ep < 1e-12) and np.all(ec < 1e-12)
        assert np.max(np.abs(lp - lc) / np.maximum(1, np.abs(lp))) < 1e-13


@pytest.mark.parametrize("impl", [pure, compiled])
def test_beta_integral_against_quad(impl):
    def direct(al, be, ga, y, de, ep):
        f = lambda u: u ** al * (1 - u) ** be * ((1 - u) + y * u) ** ga * np.exp(de * u / (1 - u) + ep * u)
        return np.log(integrate.quad(f, 0, 1, epsabs=0, epsrel=1e-12, limit=200)[0])
    for args in [(0.5, 1.5, -2.0, 3.0, 0.0, 0.0), (2.0, 0.0, 0.0, 1.0, -4.0, 0.0), (1.0, 2.0, 0.0, 1.0, 0.0, -7.5)]:
        val, err = impl.log_beta_integral(*args)
        assert abs(float(val) - direct(*args)) < 1e-10


def test_series_backends_agree():
    g = np.random.default_rng(9)
    a, b, c = g.uniform(-10, 10, 500), g.uniform(-10, 10, 500), g.uniform(0.5, 10, 500)
    z = g.uniform(-0.5, 0.5, 500)
    for fp, fc, args in ((pure.series_2f1, compiled.series_2f1, (a, b, c, z)),
                         (pure.series_1f1, compiled.series_1f1, (a, c, 40 * z))):
        lp, sp, _ = fp(*args)
        lc, sc_, _ = fc(*args)
        assert np.array_equal(sp, sc_)
        assert np.max(np.abs(lp - lc)) < 1e-13


def test_backend_selection():
    assert kernels.BACKEND == "compiled"
    env = dict(os.environ, RMTCOMPOUND_PURE="1")
    out = subprocess.run([sys.executable, "-c", "from rmtcompound import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
