import math

import numpy as np
import pytest

from rdb_regions.gaussian import (
    DistortionPair,
    GaussianInputError,
    GaussianProblem,
    Regime,
    Winner,
    case5_mask,
    classify_uncoded_regime,
    compare,
    crossover_interval,
    separation_alpha,
    separation_rate_closed,
    separation_rate_numeric,
    single_helper_gaussian_bound,
    sweep_curve,
    thresholds,
    uncoded_rate,
    wz_rate,
    write_sweep_csv,
)

REF = GaussianProblem(1.0, 0.6, 0.3, 1.0)


def test_thresholds_reference_params():
    th = thresholds(REF)
    assert th.d1_star == pytest.approx(0.473684, abs=1e-6)
    assert th.d2_star == pytest.approx(0.230769, abs=1e-6)
    assert th.gamma == pytest.approx(1 / 3)
    assert th.d1_tilde(0.15) == pytest.approx(0.225, abs=1e-12)


def test_thresholds_coincide_when_weak_noise_vanishes():
    th = thresholds(GaussianProblem(1.0, 1e-12, 0.3, 1.0))
    assert th.d1_star == pytest.approx(th.d2_star, abs=1e-9)


def test_regimes():
    assert classify_uncoded_regime(REF, DistortionPair(0.4, 0.15)) is Regime.CASE1
    assert classify_uncoded_regime(REF, DistortionPair(0.6, 0.2)) is Regime.CASE2
    assert classify_uncoded_regime(REF, DistortionPair(0.2, 0.15)) is Regime.CASE3
    assert classify_uncoded_regime(REF, DistortionPair(0.6, 0.5)) is Regime.CASE4
    assert uncoded_rate(REF, DistortionPair(0.6, 0.5)) == 0.0


def test_spot_rates():
    assert uncoded_rate(REF, DistortionPair(0.4, 0.15)) == pytest.approx(0.3707, abs=1e-3)
    assert uncoded_rate(REF, DistortionPair(0.4, 0.10)) == pytest.approx(0.6632, abs=1e-3)
    r, a = separation_rate_numeric(REF, DistortionPair(0.4, 0.15))
    assert r == pytest.approx(0.4407, abs=1e-3) and a == pytest.approx(0.5, abs=1e-9)
    assert separation_rate_numeric(REF, DistortionPair(0.4, 0.10))[0] == pytest.approx(0.6219, abs=1e-3)
    assert separation_rate_closed(REF, DistortionPair(0.4, 0.15)) == pytest.approx(0.5 * math.log2(0.21 / 0.114))
    assert separation_rate_closed(REF, DistortionPair(0.4, 0.10)) == pytest.approx(0.5 * math.log2(0.18 / 0.076))
    assert uncoded_rate(REF, DistortionPair(1.0, 1.0)) == 0.0


def test_wz_rate():
    assert wz_rate(0.3, 0.3) == 0.0
    assert wz_rate(0.3, 0.5) == 0.0
    assert wz_rate(0.230769, 0.1) == pytest.approx(0.5 * math.log2(2.30769), abs=1e-12)
    assert wz_rate(0.230769, 0.1) == pytest.approx(0.603225, abs=1e-6)


def test_alpha_one_below_d2_tilde():
    th = thresholds(REF)
    d2 = 0.9 * th.d2_tilde(0.4)
    r, a = separation_rate_numeric(REF, DistortionPair(0.4, d2))
    assert a == 1.0
    assert r == pytest.approx(wz_rate(th.d2_star, d2), abs=1e-12)
    assert separation_alpha(REF, DistortionPair(0.4, d2)) == 1.0


def test_compare_winners():
    assert compare(REF, DistortionPair(0.4, 0.10)).winner is Winner.SEPARATION
    assert compare(REF, DistortionPair(0.4, 0.15)).winner is Winner.UNCODED
    assert compare(REF, DistortionPair(1.0, 1.0)).winner is Winner.TIE


def test_case3_never_separation():
    rng = np.random.default_rng(5)
    seen = 0
    for _ in range(2000):
        s, a, b = 1.0, *rng.uniform(0.05, 2, 2)
        p = GaussianProblem(s, a, b, s)
        d1 = rng.uniform(0.01, 1)
        d2 = rng.uniform(0.005, d1)
        d = DistortionPair(d1, d2)
        if classify_uncoded_regime(p, d) is Regime.CASE3:
            seen += 1
            assert compare(p, d).winner is not Winner.SEPARATION
    assert seen > 50


def test_crossover_interval():
    lo, hi = crossover_interval(REF, 0.4)
    assert lo == pytest.approx(0.092308, abs=1e-6) and hi == pytest.approx(0.117647, abs=1e-6)
    th = thresholds(REF)
    lo, hi = crossover_interval(REF, th.d1_star)
    assert hi - lo < 0.05
    assert crossover_interval(REF, 0.5) is None


def test_single_helper_bound():
    for d in (0.05, 0.2, 0.9, 1.0):
        assert single_helper_gaussian_bound(0.8, 0.0, d) == 0.5 * math.log2(1 / d)
    assert single_helper_gaussian_bound(0.8, 60.0, 0.2) == pytest.approx(0.5 * math.log2(0.36 / 0.2), abs=1e-12)
    # (0.36 + 0.64 / 4) / 0.2 = 2.6
    assert single_helper_gaussian_bound(0.8, 1.0, 0.2) == pytest.approx(0.5 * math.log2(2.6), abs=1e-12)
    assert single_helper_gaussian_bound(0.8, 1.0, 0.2) == pytest.approx(0.689256, abs=1e-6)
    with pytest.raises(GaussianInputError):
        single_helper_gaussian_bound(1.5, 0, 0.5)


def test_input_validation():
    with pytest.raises(GaussianInputError):
        GaussianProblem(1.0, 0.6, 0.3, 2.0)
    with pytest.raises(GaussianInputError):
        GaussianProblem(1.0, 0.6, 0.3, 1.0, rho=2)
    with pytest.raises(GaussianInputError):
        GaussianProblem(1.0, -0.6, 0.3)
    with pytest.raises(GaussianInputError):
        uncoded_rate(REF, DistortionPair(0.1, 0.2))
    p = GaussianProblem(1.0, 0.6, 0.3, 2.0, allow_power_mismatch=True)
    assert not p.equal_power
    assert not compare(p, DistortionPair(0.4, 0.1)).equal_power


def test_power_mismatch_scales_uncoded_noise():
    p = GaussianProblem(1.0, 0.6, 0.3, 2.0, allow_power_mismatch=True)
    assert p.uncoded_noise == pytest.approx((0.3, 0.15))


def test_sweep_single_row_and_errors(tmp_path):
    rows = sweep_curve(REF, 0.4, [0.1])
    assert rows == [compare(REF, DistortionPair(0.4, 0.1))]
    with pytest.raises(GaussianInputError):
        sweep_curve(REF, 0.4, [0.1, 0.5])
    with pytest.raises(GaussianInputError):
        sweep_curve(REF, 0.4, [0.2, 0.1])
    with open(tmp_path / "s.csv", "w") as fh:
        write_sweep_csv(rows, fh)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "d2,r_uncoded,r_separation,regime,alpha_star,winner" and len(lines) == 2


def test_sweep_winner_flip_at_crossover():
    grid = np.linspace(0.05, 0.23, 200)
    rows = sweep_curve(REF, 0.4, grid)
    sep = [r.winner is Winner.SEPARATION for r in rows]
    k = sep.index(False, sep.index(True))
    assert grid[k - 1] <= 0.117647 <= grid[k]
    assert all(b.r_uncoded <= a.r_uncoded + 1e-12 for a, b in zip(rows, rows[1:]))


def test_uncoded_zero_past_d2_star_when_d1_large():
    th = thresholds(REF)
    rows = sweep_curve(REF, 0.6, np.linspace(0.1, 0.35, 30))
    for r in rows:
        if r.d2 > th.d2_star:
            assert r.r_uncoded == 0.0
        else:
            assert r.r_uncoded > 0.0 or r.d2 == pytest.approx(th.d2_star)


def test_case5_mask_small():
    assert not case5_mask(1.0, 0.6, 0.3, 0.4, 0.1)


def test_uncoded_rate_continuous_across_regimes():
    th = thresholds(REF)
    eps = 1e-9
    r = lambda d1, d2: uncoded_rate(REF, DistortionPair(d1, d2))
    for d2 in (0.05, 0.1, 0.15, 0.2):
        t = th.d1_tilde(d2)
        if t < th.d1_star:
            assert abs(r(t + eps, d2) - r(t - eps, d2)) < 1e-6
        assert abs(r(th.d1_star + eps, d2) - r(th.d1_star - eps, d2)) < 1e-6
    for d1 in (0.5, 0.7, 0.9):
        assert abs(r(d1, th.d2_star + eps) - r(d1, th.d2_star - eps)) < 1e-6
    # at the exact boundary the lower-numbered case is reported
    d2 = 0.15
    assert classify_uncoded_regime(REF, DistortionPair(th.d1_tilde(d2), d2)) is Regime.CASE1
