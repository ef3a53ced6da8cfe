import warnings

import numpy as np
import pytest

from rmtcompound import fitter as ft
from rmtcompound import model_dists as md
from rmtcompound.correlation import SpectralDecomp
from rmtcompound.errors import BoundaryWarning, DataError, EvalError, ParamError
from rmtcompound.sampler import SeededRng, draw_compound, draw_epoch_amplitudes


def test_normal_histogram_center(rng):
    h = ft.build_histogram(rng.standard_normal(1_000_000), bins=101)
    mid = 50
    assert abs(h.density[mid] - 0.3989) < 3 * h.density_stderr[mid]
    assert abs(np.sum(h.density * h.widths) - 1) < 1e-10
    assert h.n_total == 1_000_000


def test_constant_sample_is_a_spike():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        h = ft.build_histogram(np.full(1000, 2.0), bins=11)
    assert np.count_nonzero(h.counts) == 1
    assert np.sum(h.density * h.widths) == pytest.approx(1.0, abs=1e-12)


def test_symmetric_input_gives_symmetric_density(rng):
    x = rng.standard_t(3, 500_000)
    h = ft.build_histogram(np.concatenate([x, -x]), bins=61)
    d, se = h.density, h.density_stderr
    keep = h.counts > 0
    z = (d - d[::-1])[keep] / np.hypot(se, se[::-1])[keep]
    assert np.max(np.abs(z)) < 5


def test_histogram_validation():
    with pytest.raises(DataError):
        ft.build_histogram([])
    with pytest.raises(DataError):
        ft.Histogram([0, 1, 1], [1, 2])
    with pytest.raises(DataError):
        ft.Histogram([0, 1, 2], [1, -2])


def _step(h):
    return lambda x: h.density[np.clip(np.searchsorted(h.edges, x) - 1, 0, h.counts.size - 1)]


def test_chi_squared_properties(rng):
    h = ft.build_histogram(rng.standard_normal(100_000), bins=41)
    for scale in ("log", "lin"):
        assert ft.chi_squared(h, _step(h), scale) < 1e-25
    pdf = lambda x: np.exp(-0.5 * x * x) / np.sqrt(2 * np.pi)
    mirrored = ft.Histogram(-h.edges[::-1], h.counts[::-1], h.scale)
    for scale in ("log", "lin"):
        assert ft.chi_squared(mirrored, pdf, scale) == pytest.approx(ft.chi_squared(h, pdf, scale), rel=1e-13)
        assert ft.chi_squared(h, pdf, scale) >= 0
    with pytest.raises(EvalError) as exc:
        ft.chi_squared(h, lambda x: np.where(x > 1, np.nan, 1.0))
    assert exc.value.abscissa > 1


def test_epoch_fit_recovers_l_rot():
    p = md.ModelParams.rotated("AG", l_rot=2.6)
    x = draw_epoch_amplitudes(SpectralDecomp.identity(1), p, 1_000_000, SeededRng(12))[:, 0]
    for scale in ("log", "lin"):
        res = ft.fit_epoch(ft.build_histogram(x, scale))
        assert abs(res.params["l_rot"] - 2.6) < 0.1
        assert all(res.chi2 <= s.chi2 for s in res.starts)


def test_gaussian_sample_gives_large_l_rot(rng):
    h = ft.build_histogram(rng.standard_normal(1_000_000), "lin")
    assert ft.fit_epoch(h).params["l_rot"] > 100


def test_exact_gaussian_histogram_pushes_l_rot_to_bound():
    from scipy.stats import norm
    e = np.linspace(-5, 5, 81)
    h = ft.Histogram(e, np.round(1e13 * np.diff(norm.cdf(e))).astype(np.int64), "lin")
    with pytest.warns(BoundaryWarning):
        res = ft.fit_epoch(h)
    assert res.at_bound == ["l_rot"]
    assert res.params["l_rot"] > 0.99 * ft.L_ROT_MAX


def test_gg_fit_recovers_n():
    p = md.ModelParams.rotated("GG", 6.0)
    x = draw_compound(p, SpectralDecomp.identity(1), 1_000_000, SeededRng(13))[:, 0]
    res = ft.fit_long(ft.build_histogram(x, "lin"), "GG")
    assert abs(res.params["N"] / 6 - 1) < 0.1


def test_fits_are_deterministic():
    p = md.ModelParams.rotated("AG", 4.0, 3.0)
    x = draw_compound(p, SpectralDecomp.identity(1), 200_000, SeededRng(14))[:, 0]
    h = ft.build_histogram(x, "lin")
    a = ft.fit_long(h, "AG", l_rot=3.0, workers=1).to_dict()
    b = ft.fit_long(h, "AG", l_rot=3.0, workers=4).to_dict()
    assert a == b


def test_fit_preconditions():
    h = ft.Histogram(np.linspace(-1, 1, 11), np.ones(10, dtype=int))
    with pytest.raises(ParamError):
        ft.fit_long(h, "AA")
    with pytest.raises(ParamError):
        ft.fit_long_unreduced(h, 2.6, 2.2, 4.0, starts=4)
    with pytest.raises(ParamError):
        ft.fit_epoch(h, Y="G")


def test_ambiguity_report_on_exact_line():
    L = np.array([10.0, 40.0, 90.0, 300.0])
    rep = ft.ambiguity_report([(a, 0.94 * (2 * a - 5.2), 0.004) for a in L], N=3.2)
    assert rep.slope == pytest.approx(1.88, rel=1e-12)
    assert rep.r2 == pytest.approx(1.0, abs=1e-12)
    assert rep.B == pytest.approx(0.94, rel=1e-12)
    assert rep.predicted_intercept == pytest.approx(-0.94 * 5.2, rel=1e-12)
    assert rep.chi2_spread == 0.0 and rep.L_rot_spread > 0.5


def test_reference_rows_imply_common_b():
    from rmtcompound.pipeline import REFERENCE_AMBIGUITY
    B = [r["M"] / (2 * r["L_rot"] - r["N"] - 2) for r in REFERENCE_AMBIGUITY]
    assert B[0] == pytest.approx(0.940, abs=1e-3)
    assert B[1] == pytest.approx(0.942, abs=1e-3)
    with pytest.raises(ParamError):
        ft.ambiguity_report([(1, 2), (3, 4)], 3.2)
