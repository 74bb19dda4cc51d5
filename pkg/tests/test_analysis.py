"""Fitters on synthetic data and whole-ledger analysis."""

import itertools
import math

import numpy as np
import pandas as pd
import pytest

from qapsat.analysis import (
    PowerFit, ProportionCurve, SigmoidGrid, _grid_mse, analyze_ledger, critical_correlation,
    linear_fit, logit_fit, phase_parameter, power_model_fit, read_analysis, satisfaction_proportions,
    sigmoid, sigmoid_fit_grid, write_analysis,
)
from qapsat.errors import FitError
from qapsat.plots import FIGURES, emit_plots

LOG_K, A1, A2 = 1.65453, -0.75999, 0.90365


def logistic(m, b0, b1):
    return 1 / (1 + np.exp(-(b0 + b1 * m)))


# -- proportions and logit ---------------------------------------------------

def test_proportions():
    df = pd.DataFrame({"n": 10, "m1": 9, "m": [8] * 20 + [1] * 5,
                       "satisfied": [1] * 10 + [0] * 10 + [1] * 5})
    (curve,) = satisfaction_proportions(df)
    assert curve.points == ((1, 1.0, 5), (8, 0.5, 20))
    assert satisfaction_proportions(df.iloc[0:0]) == []


def test_logit_noiseless():
    m = np.arange(1, 16, dtype=float)
    f = logit_fit((m, logistic(m, 4.0, -0.5)))
    assert f.beta0 == pytest.approx(4.0, abs=1e-9)
    assert f.beta1 == pytest.approx(-0.5, abs=1e-9)
    assert f.m_c == pytest.approx(8.0, abs=1e-9)
    assert f.r_squared == pytest.approx(1.0, abs=1e-12)


def test_logit_drops_boundary_points():
    curve = ProportionCurve(10, 9, ((1, 1.0, 30), (4, 0.8, 30), (5, 0.5, 30), (6, 0.2, 30), (9, 0.0, 30)))
    f = logit_fit(curve)
    assert f.points_used == 3
    assert f.m_c == pytest.approx(5.0, abs=1e-9)


def test_logit_needs_interior_points():
    with pytest.raises(FitError):
        logit_fit(([1, 2, 3], [1.0, 0.5, 0.0]))


# -- linear ------------------------------------------------------------------

def test_linear_exact():
    b0, b1, adj = linear_fit([1, 2, 3, 4], [3, 5, 7, 9])
    assert (b0, b1, adj) == pytest.approx((1.0, 2.0, 1.0), abs=1e-9)


def test_linear_permutation_invariant(rng):
    x = rng.random(12)
    y = 3 * x + rng.normal(0, 0.1, 12)
    idx = rng.permutation(12)
    a, b = linear_fit(x, y), linear_fit(x[idx], y[idx])
    assert a.beta0 == pytest.approx(b.beta0, abs=1e-12) and a.beta1 == pytest.approx(b.beta1, abs=1e-12)


@pytest.mark.parametrize("x,y", [([1, 1, 1], [1, 2, 3]), ([1, 2], [1, 2])])
def test_linear_degenerate(x, y):
    with pytest.raises(FitError):
        linear_fit(x, y)


# -- sigmoid grid ------------------------------------------------------------

def test_sigmoid_recovers_grid_parameters():
    m = np.arange(1, 41, dtype=float)
    y = sigmoid(m, 100, 1, 10)
    f = sigmoid_fit_grid(m, y)
    step_L = (1.5 - 0.5) / 40 * y.max()
    assert abs(f.L - 100) <= step_L
    assert abs(f.r - 1) <= 0.05 + 1e-12
    assert abs(f.m_t - 10) <= 0.1 + 1e-12
    assert f.r_squared > 0.9999


def test_sigmoid_decreasing():
    m = np.arange(1, 41, dtype=float)
    y = sigmoid(m, 1.0, 0.5, 17.3, decreasing=True)
    f = sigmoid_fit_grid(m, y, decreasing=True)
    assert abs(f.m_t - 17.3) <= 0.1 + 1e-9
    assert f.r_squared > 0.999


def test_sigmoid_exhaustive_rescan(rng):
    m = np.arange(1, 31, dtype=float)
    y = sigmoid(m, 50, 0.4, 12.5) + rng.normal(0, 3, m.size)
    grid = SigmoidGrid()
    f = sigmoid_fit_grid(m, y, grid)
    Ls, rs = grid.L_values(y.max()), grid.r_values()
    coarse = _grid_mse(m, y, Ls, rs, grid.coarse_m(m), False)
    best_coarse = grid.coarse_m(m)[np.unravel_index(np.argmin(coarse), coarse.shape)[2]]
    fine = _grid_mse(m, y, Ls, rs, grid.fine_m(best_coarse), False)
    # brute force every visited grid point
    for L, r, mt in itertools.product(Ls[::5], rs[::7], np.concatenate([grid.coarse_m(m), grid.fine_m(best_coarse)])):
        assert f.mse <= np.mean((sigmoid(m, L, r, mt) - y) ** 2) + 1e-9
    assert f.mse <= min(coarse.min(), fine.min()) + 1e-9


def test_sigmoid_degenerate():
    with pytest.raises(FitError):
        sigmoid_fit_grid(np.arange(10), np.ones(10))
    with pytest.raises(FitError):
        sigmoid_fit_grid([1, 2, 3], [1, 2, 3])


# -- power model -------------------------------------------------------------

def _power_rows(noise=None):
    rows = []
    for n, m1 in itertools.product(range(8, 14), range(3, 28, 3)):
        mc = math.exp(LOG_K) * n ** A1 * m1 ** A2
        if noise is not None:
            mc *= math.exp(noise.normal(0, 0.05))
        rows.append((n, m1, mc))
    return rows


def test_power_noiseless():
    f = power_model_fit(_power_rows())
    assert (f.log_k, f.alpha1, f.alpha2) == pytest.approx((LOG_K, A1, A2), abs=1e-9)
    assert f.k == pytest.approx(5.23, abs=0.01)
    assert f.r_squared_log == pytest.approx(1.0) and f.r_squared_raw == pytest.approx(1.0)


def test_power_residuals_orthogonal(rng):
    rows = np.array(_power_rows(rng))
    f = power_model_fit(rows)
    X = np.column_stack([np.ones(len(rows)), np.log(rows[:, 0]), np.log(rows[:, 1])])
    resid = np.log(rows[:, 2]) - X @ np.array([f.log_k, f.alpha1, f.alpha2])
    assert np.abs(X.T @ resid).max() <= 1e-9


def test_power_rank_deficient_and_dropped_rows():
    with pytest.raises(FitError):
        power_model_fit([(10, m1, m1 * 0.6) for m1 in (3, 6, 9, 12)])
    f = power_model_fit(_power_rows() + [(8, 3, -1.0)])
    assert f.rows_dropped == 1


def test_phase_parameter():
    f = PowerFit(LOG_K, A1, A2, 1, 1)
    for n, m1 in ((8, 3), (12, 21)):
        m = f.k * n ** A1 * m1 ** A2
        assert phase_parameter(n, m1, m, f) == pytest.approx(f.k)
    assert phase_parameter(9, 6, 7.0, PowerFit(0, 0, 0, 1, 1)) == 7.0
    x = phase_parameter(10, 9, np.arange(1, 6), f)
    assert (np.diff(x) > 0).all()
    assert phase_parameter(10, 9, 5, f) > phase_parameter(10, 12, 5, f)


# -- correlation -------------------------------------------------------------

def test_correlation_extremes():
    a = {(10, m1): 0.6 * m1 for m1 in (3, 6, 9, 12)}
    same = critical_correlation(a, a)
    assert same.rho == pytest.approx(1.0) and same.fit.beta1 == pytest.approx(1.0)
    anti = critical_correlation(a, {c: -v for c, v in a.items()})
    assert anti.rho == pytest.approx(-1.0)
    with pytest.raises(FitError):
        critical_correlation(a, {(10, 3): 1.0, (10, 6): 2.0})


# -- whole ledger ------------------------------------------------------------

def synthetic_ledger(rng, reps=30):
    rows = []
    for n, m1 in itertools.product((8, 10, 12), (6, 12, 18)):
        mc = math.exp(LOG_K) * n ** A1 * m1 ** A2
        for m in range(1, 31):
            p = logistic(m, 2.0 * mc * 0.4, -0.4 * 2.0)
            for rep in range(reps):
                rows.append({"n": n, "m1": m1, "m": m, "replicate": rep, "proven": 1,
                             "satisfied": int(rng.random() < p),
                             "bnb_nodes": sigmoid(m, 1000 * n, 0.5, mc + 3) + rng.normal(0, 20),
                             "rots_success_rate": sigmoid(m, 1.0, 0.5, 0.6 * mc + 2, True),
                             "rots_mean_iterations": 100.0})
    return pd.DataFrame(rows)


def test_analyze_ledger_recovers_structure(rng, tmp_path):
    res = analyze_ledger(synthetic_ledger(rng))
    assert res.power is not None
    assert res.power.alpha2 == pytest.approx(A2, abs=0.15)
    assert res.power.alpha1 == pytest.approx(A1, abs=0.3)
    corr = res.fits[(res.fits.model == "corr_rots") & res.fits.n.isna()].iloc[0]
    assert corr.rho > 0.95
    # round trip
    write_analysis(res, tmp_path)
    back = read_analysis(tmp_path)
    assert back.power.alpha1 == pytest.approx(res.power.alpha1, abs=1e-8)
    assert len(back.fits) == len(res.fits)


def test_plots_complete_and_deterministic(rng, tmp_path):
    res = analyze_ledger(synthetic_ledger(rng, reps=10))
    first = emit_plots(res, tmp_path / "a")
    second = emit_plots(res, tmp_path / "b")
    assert [p.name for p in first] == list(FIGURES)
    for p, q in zip(first, second):
        assert p.read_bytes() == q.read_bytes()


def test_plots_empty_input(tmp_path, caplog):
    res = analyze_ledger(pd.DataFrame())
    assert emit_plots(res, tmp_path / "none") == []
    assert not (tmp_path / "none").exists()
    assert "no curves" in caplog.text


def test_success_forms(rng):
    # success falls from 1 to a 0.6 plateau: only the complement form can follow it
    led = synthetic_ledger(rng, reps=5)
    led["rots_success_rate"] = 1 - 0.4 * sigmoid(led["m"].to_numpy(float), 1.0, 0.8, 9.0)
    comp = analyze_ledger(led)
    dec = analyze_ledger(led, success_form="decreasing")
    pick = lambda res: res.fits[(res.fits.model == "rots_sigmoid") & (res.fits.n == 10) & (res.fits.m1 == 12)].iloc[0]
    c, d = pick(comp), pick(dec)
    assert c.form == "complement" and abs(c.m_t - 9.0) <= 0.1 + 1e-9 and c.r_squared > 0.999
    assert d.form == "decreasing" and d.r_squared < c.r_squared
    with pytest.raises(ValueError):
        analyze_ledger(led, success_form="upside-down")


def test_success_all_ones_is_degenerate(rng):
    led = synthetic_ledger(rng, reps=3)
    led["rots_success_rate"] = 1.0
    f = analyze_ledger(led).fits
    assert f[f.model == "rots_sigmoid"].error.notna().all()
