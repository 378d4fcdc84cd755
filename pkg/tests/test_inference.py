import json
import math
import warnings
from statistics import NormalDist

import numpy as np
import pytest

from gustat.exceptions import InvalidArgs
from gustat.generators import LinearGaussian, TwoPoint
from gustat.inference import (BEInputs, be_bound_complete, be_bound_convolution,
                              be_bound_incomplete_linear, be_bound_subgaussian,
                              bound_breakdown, build_ci, ci_variance, estimate_g_moments,
                              estimate_h_moments, moments_from_values, normal_cdf,
                              normal_quantile)
from gustat.learners import FunctionKernel

E_ABS_Z3 = 2 * math.sqrt(2 / math.pi)


# --- normal helpers ---------------------------------------------------------

@pytest.mark.parametrize("q", [1e-6, 0.01, 0.3, 0.5, 0.8, 0.975, 1 - 1e-9])
def test_normal_quantile_against_stdlib(q):
    assert normal_quantile(q) == pytest.approx(NormalDist().inv_cdf(q), abs=1e-9)


@pytest.mark.parametrize("x", [-8.0, -1.3, 0.0, 0.7, 4.0])
def test_normal_cdf_against_erf(x):
    assert normal_cdf(x) == pytest.approx(0.5 * math.erfc(-x / math.sqrt(2)), abs=1e-14)


# --- confidence intervals ---------------------------------------------------

def test_ci_example():
    ci = build_ci(0.0, 1.0, 1.0, n=100, s=10, N=100, level=0.95)
    assert ci.variance_used == pytest.approx(1.01, rel=1e-15)
    assert ci.half_width == pytest.approx(NormalDist().inv_cdf(0.975) * math.sqrt(1.01),
                                          rel=1e-12)
    assert ci.half_width == pytest.approx(1.9698, abs=1e-4)
    assert ci.lower == -ci.half_width and ci.upper == ci.half_width


def test_ci_levels_ordered():
    w = [build_ci(0.0, 0.5, 2.0, 50, 5, 20, lv).half_width for lv in (0.9, 0.95, 0.99)]
    assert w[0] < w[1] < w[2]


def test_ci_large_N_limit():
    limit = NormalDist().inv_cdf(0.975) * 10 * math.sqrt(1.0 / 100)
    widths = [build_ci(0.0, 1.0, 1.0, 100, 10, N, 0.95).half_width for N in (10, 1e3, 1e6)]
    assert widths[0] > widths[1] > widths[2] > limit
    assert build_ci(0.0, 1.0, 1.0, 100, 10, None).half_width == pytest.approx(limit, rel=1e-14)
    assert widths[2] == pytest.approx(limit, rel=1e-6)


@pytest.mark.parametrize("z1,zs,n,s,N", [(0.3, 2.0, 40, 7, 13), (1e-3, 0.5, 1000, 30, 250)])
def test_ci_variance_hand_arithmetic(z1, zs, n, s, N):
    assert ci_variance(z1, zs, n, s, N) == pytest.approx(s * s * z1 / n + zs / N, rel=1e-15)


def test_ci_covers():
    ci = build_ci(1.0, 1.0, 1.0, 100, 10, 100)
    assert ci.covers(1.0) and ci.covers(2.9) and not ci.covers(3.0)


@pytest.mark.parametrize("args", [(0.0, -1.0, 1.0, 10, 2, 5, 0.95),
                                  (0.0, 1.0, 1.0, 10, 2, 5, 1.0),
                                  (0.0, 0.0, 0.0, 10, 2, 5, 0.95),
                                  (0.0, 1.0, 1.0, 10, 2, 0, 0.95)])
def test_ci_invalid(args):
    with pytest.raises(InvalidArgs):
        build_ci(*args)


# --- Berry-Esseen bounds ----------------------------------------------------

def _mean_inputs(n, s, N=None):
    # analytic mean-kernel moments under a standard normal response
    return BEInputs(n=n, s=s, zeta1=1 / s ** 2, zeta_s=1 / s, N=N,
                    Eg2=1 / s ** 2, Eg3=E_ABS_Z3 / s ** 3,
                    Eh2=1 / s, Eh3=E_ABS_Z3 / s ** 1.5)


@pytest.mark.parametrize("n", [100, 1000, 10_000])
def test_complete_bound_mean_kernel(n):
    out = bound_breakdown("complete", _mean_inputs(n, 10))
    assert out["nonlinearity"] == 0.0
    assert out["total"] == pytest.approx(6.1 * E_ABS_Z3 / math.sqrt(n), rel=1e-12)
    assert out["total"] == pytest.approx(9.734 / math.sqrt(n), rel=1e-4)


def test_complete_bound_n_1e4():
    assert be_bound_complete(_mean_inputs(10_000, 10)) == pytest.approx(0.09734, abs=5e-6)


def test_complete_bound_decreasing_in_n():
    base = dict(s=10, zeta1=0.01, zeta_s=0.3, Eg3=0.002)
    vals = [be_bound_complete(BEInputs(n=n, **base)) for n in (100, 200, 400, 800)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[1] == pytest.approx(vals[0] / math.sqrt(2), rel=1e-12)


def test_incomplete_p1_equals_complete():
    inp = BEInputs(n=8, s=3, zeta1=0.05, zeta_s=0.4, N=56, Eg3=0.01)
    assert inp.p == 1.0
    assert be_bound_incomplete_linear(inp) == be_bound_complete(inp)


def test_incomplete_third_term():
    inp = BEInputs(n=10_000, s=100, zeta1=1e-4, zeta_s=1e-2, N=10_000, Eg3=1e-6)
    assert inp.p == 0.0 and inp.ratio == pytest.approx(1.0)
    out = bound_breakdown("incomplete", inp)
    assert out["sampling"] == pytest.approx(1.1, rel=1e-12)
    assert out["total"] == pytest.approx(1.1 + be_bound_complete(inp), rel=1e-12)


def test_incomplete_decreasing_in_N():
    vals = [be_bound_incomplete_linear(BEInputs(n=1000, s=20, zeta1=1e-3, zeta_s=0.1,
                                                N=N, Eg3=1e-5))
            for N in (100, 1000, 10_000)]
    assert vals[0] > vals[1] > vals[2]


def test_convolution_mean_kernel_terms():
    n, s, N = 10_000, 10, 1000
    out = bound_breakdown("convolution", _mean_inputs(n, s, N), C=1.0)
    assert out["linear"] == pytest.approx(E_ABS_Z3 / math.sqrt(n), rel=1e-12)
    assert out["sampling"] == pytest.approx(E_ABS_Z3 / math.sqrt(N), rel=1e-12)
    assert out["nonlinearity"] == 0.0
    assert out["order"] == pytest.approx(1e-3 ** (1 / 3), rel=1e-12)
    assert out["total"] == pytest.approx(
        E_ABS_Z3 / 100 + E_ABS_Z3 / math.sqrt(1000) + 0.1, rel=1e-12)
    assert out["note"] == "up to the universal constant C"


def test_convolution_linear_in_C():
    inp = _mean_inputs(1000, 10, 500)
    assert be_bound_convolution(inp, 2.0) == pytest.approx(2 * be_bound_convolution(inp, 1.0),
                                                          rel=1e-14)


def test_convolution_small_s_over_n_dominated_by_sampling():
    inp = _mean_inputs(10 ** 12, 2, 100)
    out = bound_breakdown("convolution", inp)
    assert out["sampling"] == max(out[k] for k in ("linear", "sampling", "nonlinearity", "order"))
    assert out["total"] == pytest.approx(out["sampling"], rel=0.02)


def test_subgaussian_terms():
    inp = _mean_inputs(1000, 10, 500)
    out = bound_breakdown("subgaussian", inp, C=1.0, eta=0.49)
    assert out["order"] == pytest.approx(10 ** -0.98, rel=1e-12)
    assert round(out["order"], 3) == 0.105
    conv = bound_breakdown("convolution", inp, C=1.0)
    sub = bound_breakdown("subgaussian", inp, C=1.0, eta=1 / 3)
    assert sub["order"] == conv["order"]
    assert (be_bound_subgaussian(inp, 1.0, 0.45) < be_bound_subgaussian(inp, 1.0, 0.2))


@pytest.mark.parametrize("eta", [0.0, 0.5, -0.1, 0.7])
def test_subgaussian_eta_range(eta):
    with pytest.raises(InvalidArgs):
        be_bound_subgaussian(_mean_inputs(1000, 10, 500), 1.0, eta)


@pytest.mark.parametrize("form", ["complete", "incomplete", "convolution", "subgaussian"])
def test_bounds_nonincreasing_in_n(form):
    # the incomplete form's sampling term scales with n/N, so N grows with n there
    vals = []
    for n in (200, 400, 800, 1600):
        N = 3 * n if form == "incomplete" else 300
        inp = BEInputs(n=n, s=10, zeta1=0.008, zeta_s=0.2, N=N, Eg2=0.008, Eg3=0.001,
                       Eh2=0.2, Eh3=0.1, p=0.0)
        vals.append(bound_breakdown(form, inp, C=1.0, eta=0.3)["total"])
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_negative_bracket_clamped_with_warning():
    inp = BEInputs(n=100, s=10, zeta1=0.02, zeta_s=0.1, Eg3=0.001)  # ratio 0.5 < 1
    with pytest.warns(RuntimeWarning):
        out = bound_breakdown("complete", inp)
    assert out["nonlinearity"] == 0.0


def test_bound_input_validation(tmp_path):
    with pytest.raises(InvalidArgs):
        be_bound_complete(BEInputs(n=10, s=2, zeta1=0.0, zeta_s=1.0, Eg3=1.0))
    with pytest.raises(InvalidArgs):
        be_bound_complete(BEInputs(n=10, s=2, zeta1=1.0, zeta_s=1.0))
    with pytest.raises(InvalidArgs):
        BEInputs(n=10, s=2, zeta1=-1.0, zeta_s=1.0)
    with pytest.raises(InvalidArgs):
        BEInputs(n=10, s=2, zeta1=1.0, zeta_s=1.0, kur1=0.5)
    with pytest.raises(InvalidArgs):
        BEInputs.from_dict({"n": 10, "s": 2, "zeta1": 1, "zeta_s": 1, "bogus": 3})
    with pytest.raises(InvalidArgs):
        bound_breakdown("nope", _mean_inputs(100, 10))
    path = tmp_path / "in.json"
    path.write_text(json.dumps({"n": 100, "s": 10, "zeta1": 0.01, "zeta_s": 0.1,
                                "Eg3": E_ABS_Z3 / 1000}))
    assert be_bound_complete(BEInputs.from_json_file(path)) == pytest.approx(0.9734, rel=1e-4)


# --- moment estimators ------------------------------------------------------

def test_g_moments_mean_kernel():
    s = 2
    gm = estimate_g_moments("mean", LinearGaussian((0.0,), 1.0), s, M=20000, seed=3,
                            m_inner=256, center=0.0)
    assert abs(gm.Eg2 - 1 / s ** 2) <= 3 * gm.se_Eg2
    # Eg3 carries an upward inner-averaging bias of about 1.5 / m_inner relative
    assert abs(gm.Eg3 - E_ABS_Z3 / s ** 3) <= 3 * gm.se_Eg3 + 0.01 * E_ABS_Z3 / s ** 3


def test_g_moments_constant_kernel():
    gm = estimate_g_moments(FunctionKernel(lambda X, y: 2.0), LinearGaussian((0.0,), 1.0), 3,
                            M=100, m_inner=4)
    assert (gm.Eg2, gm.Eg3) == (0.0, 0.0)


def test_g_moments_symmetric_center():
    gm = estimate_g_moments("mean", TwoPoint((-1.0, 1.0)), 4, M=4000, seed=1, m_inner=8)
    assert abs(gm.center) <= 4 * 0.5 / math.sqrt(4000 * 8)


def test_h_moments_standard_normal():
    hm = estimate_h_moments("mean", LinearGaussian((0.0,), 1.0), 1, M=400_000, seed=5)
    assert abs(hm.kur1 - 3.0) <= 3 * hm.se_kur1
    assert abs(hm.kur2 - 15 / (8 / math.pi)) <= 3 * hm.se_kur2
    assert round(15 / (8 / math.pi), 3) == 5.890


def test_h_moments_two_point():
    hm = moments_from_values(np.tile([-1.0, 1.0], 50), center=0.0)
    assert hm.kur1 == 1.0 and hm.kur2 == 1.0
    hm = estimate_h_moments("mean", TwoPoint((-1.0, 1.0)), 1, M=1000, seed=2, center=0.0)
    assert hm.kur1 == 1.0


def test_h_moments_constant_flagged():
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        hm = moments_from_values(np.full(10, 3.0))
    assert math.isnan(hm.kur1) and math.isnan(hm.kur2)
    assert rec
