import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special, stats

from lcac.auth import AuthConfig
from lcac.errors import ExtrapolationRangeError, InsufficientDataError, InvalidInputError
from lcac.ggd import ConstellationProfile, GgdParams
from lcac.predict import (
    DemodulationRule,
    PointModel,
    PredictionModel,
    decoded_auth_ber,
    decoded_auth_ber_exact,
    fit_mean_power,
    fit_shape_avg,
    fit_variance_power,
    predict_profile,
    raw_auth_ber,
    simulate_symbol_ber,
    symbol_ber,
)
from lcac.profiles import fig15_constants, table2_profiles, table4_series

X2_MU = [117.61, 116.55, 116.17, 112.63, 111.42, 111.09, 111.14, 110.30]
X2_S2 = [474.53, 470.69, 431.69, 418.92, 414.32, 412.73, 400.48, 393.58]
X2_G = [1.91, 1.72, 1.79, 1.87, 1.65, 1.66, 1.64, 1.61]
NS = list(range(1, 9))
PAPER = fig15_constants()["constellation"]["100.0"]
RULE = DemodulationRule.from_spec()


def test_bundled_series_matches_hardcoded_values():
    s = table4_series()
    assert [s[n][100.0].mu for n in NS] == X2_MU
    assert [s[n][100.0].sigma2 for n in NS] == X2_S2
    assert [s[n][100.0].gamma for n in NS] == X2_G


def test_mean_fit_examples():
    a, b = fit_mean_power(list(zip(NS, X2_MU)))
    assert a == pytest.approx(118.6, rel=0.05) and b == pytest.approx(-0.0342, abs=0.005)
    a, b = fit_mean_power([(n, 7.0) for n in NS])
    assert (a, b) == (pytest.approx(7.0), pytest.approx(0.0, abs=1e-12))
    a, b = fit_mean_power([(n, 3 * n**0.5) for n in NS])
    assert a == pytest.approx(3, abs=1e-6) and b == pytest.approx(0.5, abs=1e-6)


def test_mean_fit_errors():
    with pytest.raises(InvalidInputError):
        fit_mean_power([(1, 1.0), (2, -1.0)])
    with pytest.raises(InsufficientDataError):
        fit_mean_power([(1, 1.0)])


def _sse(a, b, c):
    n = np.array(NS, dtype=float)
    return float(((a * n**b + c - np.array(X2_S2)) ** 2).sum())


def test_variance_fit_reproduces_printed_constants():
    a, b, c = fit_variance_power(list(zip(NS, X2_S2)))
    assert a == pytest.approx(PAPER["a_sigma"], rel=0.15)
    assert b == pytest.approx(PAPER["b_sigma"], rel=0.15)
    assert c == pytest.approx(PAPER["c_sigma"], rel=0.15)
    assert _sse(a, b, c) <= _sse(PAPER["a_sigma"], PAPER["b_sigma"], PAPER["c_sigma"])


def test_variance_fit_exact_data():
    a, b, c = fit_variance_power([(n, -10 * n**0.5 + 100) for n in NS])
    assert (a, b, c) == (pytest.approx(-10, abs=1e-6), 0.5, pytest.approx(100, abs=1e-6))
    with pytest.raises(InsufficientDataError):
        fit_variance_power([(1, 2.0), (2, 1.0)])


@given(st.permutations(X2_G))
def test_shape_average(perm):
    assert fit_shape_avg(list(zip(NS, perm))) == pytest.approx(1.73125, abs=1e-12)


def test_shape_average_edge_cases():
    assert fit_shape_avg([(3, 1.4)]) == 1.4
    with pytest.raises(InsufficientDataError):
        fit_shape_avg([])


def test_prediction_from_printed_constants():
    model = PredictionModel.from_dict(fig15_constants())
    p1 = predict_profile(model, 1)[100.0]
    assert p1.mu == pytest.approx(118.6) and p1.sigma2 == pytest.approx(479.2)
    p8 = predict_profile(model, 8)[100.0]
    assert p8.mu == pytest.approx(110.4, abs=0.1) and p8.sigma2 == pytest.approx(393.3, abs=0.1)


def test_fitted_model_tracks_series(table4_model):
    pm = table4_model[100.0]
    n = np.array(NS, dtype=float)
    ours = np.sqrt(np.mean((pm.variance(n) - X2_S2) ** 2))
    ref = PointModel(PAPER["a_mu"], PAPER["b_mu"], PAPER["a_sigma"], PAPER["b_sigma"], PAPER["c_sigma"], 1.7)
    theirs = np.sqrt(np.mean((ref.variance(n) - X2_S2) ** 2))
    assert ours <= theirs * 1.1
    ours_mu = np.sqrt(np.mean((pm.mean(n) - X2_MU) ** 2))
    theirs_mu = np.sqrt(np.mean((ref.mean(n) - X2_MU) ** 2))
    assert ours_mu <= theirs_mu * 1.1


def test_predicted_variance_decreases(table4_model):
    s2 = [predict_profile(table4_model, f)[100.0].sigma2 for f in np.linspace(1, 32, 40)]
    assert np.all(np.diff(s2) < 0)


def test_extrapolation_limits(table4_model):
    with pytest.raises(ExtrapolationRangeError):
        predict_profile(table4_model, 40)
    with pytest.raises(ExtrapolationRangeError):
        predict_profile(table4_model, 0.5)
    with pytest.raises(ExtrapolationRangeError):
        PredictionModel((100.0,), (PointModel(100, 0, -10, 1, 100, 2),))


def test_model_json_roundtrip(tmp_path, table4_model):
    table4_model.save(tmp_path / "m.json")
    back = PredictionModel.load(tmp_path / "m.json")
    assert back.points == table4_model.points
    for a, b in zip(back.constants, table4_model.constants):
        assert a == b


def _oracle_pdf(x, mu, s2, g):
    eta = math.sqrt(special.gamma(3 / g) / special.gamma(1 / g)) / math.sqrt(s2)
    return g * eta / (2 * special.gamma(1 / g)) * math.exp(-((eta * abs(x - mu)) ** g))


def _oracle_symbol_ber(p, i):
    edges = [-np.inf, 70, 130, 190, np.inf]
    total = 0.0
    for j in range(4):
        if j == i:
            continue
        alpha = 0.5 if abs(j + 1 - (i + 1)) <= 2 else 1.0
        mass = integrate.quad(_oracle_pdf, edges[j], edges[j + 1], args=(p.mu, p.sigma2, p.gamma),
                              epsabs=1e-13, epsrel=1e-11, limit=200)[0]
        total += alpha * mass
    return total


@pytest.mark.parametrize("tag", list("abcdefghijklmnop"))
def test_symbol_ber_matches_quadrature(tag):
    prof = table2_profiles()[tag]
    for i in range(4):
        assert symbol_ber(prof, RULE, i) == pytest.approx(_oracle_symbol_ber(prof.params[i], i), abs=1e-6)


def test_table4_first_row_symbol_ber():
    prof = table4_series()[1]
    assert symbol_ber(prof, RULE, 1) == pytest.approx(_oracle_symbol_ber(prof[100.0], 1), abs=1e-6)


def test_degenerate_and_wide_profiles():
    pts = (40.0, 100.0, 160.0, 220.0)
    tight = ConstellationProfile(pts, tuple(GgdParams(x, 1e-6, 2) for x in pts))
    assert raw_auth_ber(tight, RULE) == pytest.approx(0, abs=1e-12)
    wide = ConstellationProfile(pts, tuple(GgdParams(x, 1e12, 2) for x in pts))
    # half the mass lands in cell 1 and half in cell 4, whatever the point;
    # with the printed weights every point then scores 1/2
    assert raw_auth_ber(wide, RULE) == pytest.approx(0.5, abs=1e-3)


def test_alpha_tables():
    printed = RULE.alpha
    assert printed[0].tolist() == [0, 0.5, 0.5, 1.0]
    assert printed[3].tolist() == [1.0, 0.5, 0.5, 0]
    exact = DemodulationRule.from_spec(mode="bit_exact").alpha
    assert exact[0].tolist() == [0, 0.5, 1.0, 0.5]  # 00 vs 01, 11, 10


def test_predicted_raw_ber_at_ten(table4_model):
    assert raw_auth_ber(predict_profile(table4_model, 10), RULE) == pytest.approx(0.0342, abs=0.005)


def test_theory_matches_simulation_one_profile():
    prof = table2_profiles()["h"]
    theory = raw_auth_ber(prof, RULE)
    sim = simulate_symbol_ber(prof, RULE, 1_000_000, np.random.default_rng(8))
    assert abs(sim - theory) <= 3 * math.sqrt(theory * (1 - theory) / 1e6)


def _own_cell(p, i):
    th = RULE.thresholds
    return th[i] <= p.mu < th[i + 1]


def test_raw_ber_grows_with_variance():
    checked = 0
    for prof in table2_profiles().values():
        for i in range(4):
            p = prof.params[i]
            if not _own_cell(p, i):
                continue
            params = list(prof.params)
            params[i] = GgdParams(p.mu, p.sigma2 * 1.1, p.gamma)
            noisier = ConstellationProfile(prof.points, tuple(params))
            assert raw_auth_ber(noisier, RULE) >= raw_auth_ber(prof, RULE)
            checked += 1
    assert checked == 62


def test_raw_ber_can_fall_with_variance_when_the_mean_left_its_cell():
    # table2(k): the 220 point is received around 188.9, inside the 160 cell
    prof = table2_profiles()["k"]
    p = prof.params[3]
    assert not _own_cell(p, 3)
    params = list(prof.params)
    params[3] = GgdParams(p.mu, p.sigma2 * 1.1, p.gamma)
    assert raw_auth_ber(ConstellationProfile(prof.points, tuple(params)), RULE) < raw_auth_ber(prof, RULE)


def test_decoded_model_edges():
    cfg = AuthConfig()
    assert decoded_auth_ber(0.0, cfg, 1000) == (0.0, 1.0)
    assert decoded_auth_ber(1.0, cfg, 1000) == (1.0, 0.0)
    assert decoded_auth_ber_exact(0.0, cfg) == (0.0, 1.0)
    assert decoded_auth_ber_exact(1.0, cfg) == (pytest.approx(1.0), 0.0)
    with pytest.raises(InvalidInputError):
        decoded_auth_ber(1.5, cfg)


def test_decoded_model_against_binomial_oracle():
    cfg = AuthConfig()
    p0 = sum(math.comb(255, e) * 0.0342**e * (1 - 0.0342) ** (255 - e) for e in range(15))
    mean, p = decoded_auth_ber_exact(0.0342, cfg)
    assert p == pytest.approx(p0, abs=1e-12)
    mc_mean, mc_p = decoded_auth_ber(0.0342, cfg, 200_000, np.random.default_rng(0))
    assert mc_p == pytest.approx(p0, abs=4 * math.sqrt(p0 * (1 - p0) / 200_000))
    assert mc_mean == pytest.approx(mean, rel=0.05)
    assert stats.binom.cdf(14, 255, 0.0342) == pytest.approx(p)


def test_decoded_model_monotonicity():
    eps = np.linspace(0, 0.2, 41)
    for k in (147, 179, 247):
        cfg = AuthConfig.preset(k)
        means = [decoded_auth_ber_exact(e, cfg)[0] for e in eps]
        assert np.all(np.diff(means) >= -1e-15)
    for e in (0.02, 0.05, 0.08):
        by_t = [decoded_auth_ber_exact(e, AuthConfig.preset(k))[0] for k in (247, 179, 147)]
        assert by_t[0] >= by_t[1] >= by_t[2]
