"""Phase-transition statistics over a harness ledger.

* satisfaction proportions per (n, m1) cell and their logit regression,
  whose zero crossing gives the critical clause count ``m_c``;
* per-dimension linear models ``m_c ~ m1`` and the power model
  ``m_c = k n^a1 m1^a2`` fitted on logs;
* grid-search sigmoid fits of solver effort and tabu success rate, whose
  inflection ``m_t`` is compared with ``m_c``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import FitError

log = logging.getLogger(__name__)

FIT_COLUMNS = ["model", "n", "m1", "beta0", "beta1", "alpha1", "alpha2", "L", "r", "m_t", "m_c",
               "rho", "r_squared", "adj_r_squared", "r_squared_raw", "points_used", "form", "error"]
SUCCESS_FORMS = ("complement", "decreasing")


@dataclass(frozen=True)
class ProportionCurve:
    n: int
    m1: int
    points: tuple  # (m, proportion satisfied, sample count)

    @property
    def m(self):
        return np.array([p[0] for p in self.points], dtype=float)

    @property
    def p(self):
        return np.array([p[1] for p in self.points], dtype=float)


@dataclass(frozen=True)
class LogitFit:
    beta0: float
    beta1: float
    m_c: float
    r_squared: float
    points_used: int


@dataclass(frozen=True)
class LinearFit:
    beta0: float
    beta1: float
    adj_r_squared: float
    r_squared: float

    def __iter__(self):
        return iter((self.beta0, self.beta1, self.adj_r_squared))


@dataclass(frozen=True)
class SigmoidGrid:
    L_factors: tuple = (0.5, 1.5, 41)
    r_range: tuple = (0.05, 3.0, 60)
    m_step: float = 1.0
    refine_step: float = 0.1

    def L_values(self, vmax):
        lo, hi, num = self.L_factors
        return np.linspace(lo, hi, num) * vmax

    def r_values(self):
        lo, hi, num = self.r_range
        return np.linspace(lo, hi, num)

    def coarse_m(self, m):
        return np.arange(m.min(), m.max() + self.m_step / 2, self.m_step)

    def fine_m(self, centre):
        half = int(round(self.m_step / self.refine_step))
        return centre + self.refine_step * np.arange(-half, half + 1)


@dataclass(frozen=True)
class SigmoidFit:
    L: float
    r: float
    m_t: float
    r_squared: float
    mse: float
    decreasing: bool = False

    def predict(self, m):
        return sigmoid(np.asarray(m, dtype=float), self.L, self.r, self.m_t, self.decreasing)


@dataclass(frozen=True)
class PowerFit:
    log_k: float
    alpha1: float
    alpha2: float
    r_squared_log: float
    r_squared_raw: float
    rows_used: int = 0
    rows_dropped: int = 0

    @property
    def k(self) -> float:
        return math.exp(self.log_k)

    def predict(self, n, m1):
        return np.exp(self.log_k) * np.power(n, self.alpha1) * np.power(m1, self.alpha2)


@dataclass(frozen=True)
class CorrelationResult:
    rho: float
    fit: LinearFit
    cells: tuple = field(default=())


def _r_squared(y, yhat) -> float:
    y = np.asarray(y, dtype=float)
    sst = float(((y - y.mean()) ** 2).sum())
    sse = float(((y - yhat) ** 2).sum())
    if sst == 0:
        return 1.0 if sse == 0 else 0.0
    return 1.0 - sse / sst


# --------------------------------------------------------------------------
# satisfaction proportions


def load_ledger(path) -> pd.DataFrame:
    """Ledger rows without errors and with a proven minimum."""
    df = pd.read_csv(path, dtype={"error": str})
    ok = df["error"].isna() & (df["proven"] == 1)
    dropped = int((~ok).sum())
    if dropped:
        log.warning("%d ledger rows skipped (error or unproven minimum)", dropped)
    return df[ok].copy()


def satisfaction_proportions(ledger: pd.DataFrame) -> list[ProportionCurve]:
    curves = []
    if ledger.empty:
        return curves
    for (n, m1), grp in ledger.groupby(["n", "m1"], sort=True):
        stats = grp.groupby("m")["satisfied"].agg(["mean", "count"]).sort_index()
        pts = tuple((int(m), float(row["mean"]), int(row["count"])) for m, row in stats.iterrows()
                    if row["count"] > 0)
        if pts:
            curves.append(ProportionCurve(int(n), int(m1), pts))
    return curves


def logit_fit(curve) -> LogitFit:
    """OLS of logit(p) on m over the points with 0 < p < 1."""
    if isinstance(curve, ProportionCurve):
        m, p = curve.m, curve.p
    else:
        m, p = (np.asarray(v, dtype=float) for v in curve)
    inner = (p > 0) & (p < 1)
    if inner.sum() < 2:
        raise FitError(f"need two points with 0 < p < 1, have {int(inner.sum())}")
    x = m[inner]
    y = np.log(p[inner] / (1 - p[inner]))
    if np.ptp(x) == 0:
        raise FitError("all interior points share the same m")
    X = np.column_stack([np.ones_like(x), x])
    (b0, b1), *_ = np.linalg.lstsq(X, y, rcond=None)
    r2 = _r_squared(y, X @ np.array([b0, b1])) if x.size > 2 else 1.0
    m_c = -b0 / b1 if b1 != 0 else math.nan
    return LogitFit(float(b0), float(b1), float(m_c), float(r2), int(inner.sum()))


def linear_fit(x, y) -> LinearFit:
    """OLS line with adjusted R^2."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size:
        raise FitError("x and y lengths differ")
    if x.size < 3:
        raise FitError("need at least three points")
    if np.ptp(x) == 0:
        raise FitError("x is constant")
    X = np.column_stack([np.ones_like(x), x])
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    r2 = _r_squared(y, X @ beta)
    k = x.size
    adj = 1 - (1 - r2) * (k - 1) / (k - 2)
    return LinearFit(float(beta[0]), float(beta[1]), float(adj), float(r2))


# --------------------------------------------------------------------------
# sigmoid grid search


def sigmoid(m, L, r, m_t, decreasing=False):
    sign = 1.0 if decreasing else -1.0
    with np.errstate(over="ignore"):
        return L / (1.0 + np.exp(sign * r * (m - m_t)))


def _grid_mse(m, y, Ls, rs, mts, decreasing):
    sign = 1.0 if decreasing else -1.0
    # (r, m_t, point)
    with np.errstate(over="ignore"):
        base = 1.0 / (1.0 + np.exp(sign * rs[:, None, None] * (m[None, None, :] - mts[None, :, None])))
    # MSE for every L from three sums: mean((L b - y)^2) = L^2 <b,b> - 2 L <b,y> + <y,y>
    bb = (base * base).mean(axis=2)
    by = (base * y).mean(axis=2)
    yy = (y * y).mean()
    return Ls[:, None, None] ** 2 * bb[None] - 2 * Ls[:, None, None] * by[None] + yy


def sigmoid_fit_grid(m, values, grid: SigmoidGrid | None = None, decreasing: bool = False) -> SigmoidFit:
    """Exhaustive MSE grid search for L / (1 + exp(-r (m - m_t))).

    ``decreasing`` flips the exponent sign (curves falling with m).  The
    inflection is searched at ``grid.m_step`` over the m range, then once
    more at ``grid.refine_step`` around the best coarse value.
    """
    grid = grid or SigmoidGrid()
    m = np.asarray(m, dtype=float)
    y = np.asarray(values, dtype=float)
    if m.size != y.size:
        raise FitError("m and values lengths differ")
    if m.size < 4:
        raise FitError("need at least four points")
    if np.ptp(y) == 0:
        raise FitError("all values are equal")
    Ls = grid.L_values(y.max())
    rs = grid.r_values()
    best = None
    for mts in (grid.coarse_m(m), None):
        if mts is None:
            mts = grid.fine_m(best[3])
        mse = _grid_mse(m, y, Ls, rs, mts, decreasing)
        a, b, c = np.unravel_index(int(np.argmin(mse)), mse.shape)
        cand = (float(mse[a, b, c]), float(Ls[a]), float(rs[b]), float(mts[c]))
        if best is None or cand[0] < best[0]:
            best = cand
    mse, L, r, m_t = best
    yhat = sigmoid(m, L, r, m_t, decreasing)
    mse = float(((yhat - y) ** 2).mean())
    return SigmoidFit(L, r, m_t, _r_squared(y, yhat), mse, decreasing)


# --------------------------------------------------------------------------
# power model and phase parameter


def power_model_fit(rows) -> PowerFit:
    """Fit log m_c = log k + a1 log n + a2 log m1 by least squares.

    ``rows`` holds (n, m1, m_c) triples; rows with m_c <= 0 are dropped.
    """
    arr = np.asarray(list(rows), dtype=float).reshape(-1, 3)
    keep = arr[:, 2] > 0
    dropped = int((~keep).sum())
    if dropped:
        log.warning("power model: %d rows with non-positive m_c dropped", dropped)
    arr = arr[keep]
    if arr.shape[0] < 4:
        raise FitError("need at least four rows with positive m_c")
    X = np.column_stack([np.ones(arr.shape[0]), np.log(arr[:, 0]), np.log(arr[:, 1])])
    if np.linalg.matrix_rank(X) < 3:
        raise FitError("n and m1 must each vary (design matrix is rank deficient)")
    y = np.log(arr[:, 2])
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    r2 = _r_squared(y, X @ beta)
    k = arr.shape[0]
    adj = 1 - (1 - r2) * (k - 1) / (k - 3) if k > 3 else r2
    raw = _r_squared(arr[:, 2], np.exp(X @ beta))
    return PowerFit(float(beta[0]), float(beta[1]), float(beta[2]), float(adj), float(raw),
                    int(arr.shape[0]), dropped)


def phase_parameter(n, m1, m, fit: PowerFit):
    """m / (n^a1 * m1^a2)."""
    return np.asarray(m, dtype=float) / (np.power(float(n), fit.alpha1) * np.power(float(m1), fit.alpha2))


def critical_correlation(fits_a: dict, fits_b: dict) -> CorrelationResult:
    """Pearson correlation and OLS line of fits_b against fits_a over shared cells."""
    cells = sorted(set(fits_a) & set(fits_b))
    cells = [c for c in cells if np.isfinite(fits_a[c]) and np.isfinite(fits_b[c])]
    if len(cells) < 3:
        raise FitError(f"need at least three shared cells, have {len(cells)}")
    x = np.array([fits_a[c] for c in cells], dtype=float)
    y = np.array([fits_b[c] for c in cells], dtype=float)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise FitError("constant critical values: correlation undefined")
    rho = float(np.corrcoef(x, y)[0, 1])
    return CorrelationResult(rho, linear_fit(x, y), tuple(cells))


# --------------------------------------------------------------------------
# whole-ledger analysis


@dataclass
class Analysis:
    curves: pd.DataFrame  # one row per (n, m1, m)
    fits: pd.DataFrame  # one row per fitted model and cell
    power: PowerFit | None = None

    def fit_map(self, model: str, column: str) -> dict:
        sel = self.fits[(self.fits["model"] == model) & self.fits["error"].isna()]
        return {(int(r.n), int(r.m1)): float(getattr(r, column)) for r in sel.itertuples()}


def cell_curves(ledger: pd.DataFrame) -> pd.DataFrame:
    """Per (n, m1, m): count, satisfied proportion, mean B&B nodes, mean tabu success."""
    cols = {"count": ("satisfied", "count"), "p_satisfied": ("satisfied", "mean"),
            "mean_nodes": ("bnb_nodes", "mean")}
    if "rots_success_rate" in ledger and ledger["rots_success_rate"].notna().any():
        cols["mean_success"] = ("rots_success_rate", "mean")
        cols["mean_rots_iterations"] = ("rots_mean_iterations", "mean")
    if "bnb_seconds" in ledger and ledger["bnb_seconds"].notna().any():
        cols["mean_seconds"] = ("bnb_seconds", "mean")
    out = ledger.groupby(["n", "m1", "m"], sort=True).agg(**cols).reset_index()
    return out


def _row(model, n=None, m1=None, **values):
    row = {c: None for c in FIT_COLUMNS}
    row.update(model=model, n=n, m1=m1, **values)
    return row


def _fits_frame(rows) -> pd.DataFrame:
    df = pd.DataFrame(rows, columns=FIT_COLUMNS)
    for col in ("n", "m1", "points_used"):
        df[col] = df[col].astype("Int64")
    return df


def success_curve(fit_row, m):
    """Tabu success rate predicted by a ``rots_sigmoid`` fit row."""
    m = np.asarray(m, dtype=float)
    if fit_row.form == "complement":
        return 1.0 - sigmoid(m, fit_row.L, fit_row.r, fit_row.m_t)
    return sigmoid(m, fit_row.L, fit_row.r, fit_row.m_t, decreasing=True)


def analyze_ledger(ledger: pd.DataFrame, effort: str = "mean_nodes",
                   success_form: str = "complement") -> Analysis:
    """Fit every model the ledger supports.

    ``effort`` selects the B&B effort column of the cell curves
    (``mean_nodes`` or, when timings were recorded, ``mean_seconds``).

    ``success_form`` picks how falling success rates are fitted:
    ``complement`` fits the failure rate ``1 - s`` with the increasing
    sigmoid, so the curve may level off above zero; ``decreasing`` fits
    ``s`` itself with ``L / (1 + exp(r (m - m_t)))``, which tends to zero.
    Either way ``m_t`` is the inflection.
    """
    if success_form not in SUCCESS_FORMS:
        raise ValueError(f"success_form must be one of {SUCCESS_FORMS}")
    curves = cell_curves(ledger) if not ledger.empty else pd.DataFrame()
    rows = []
    power = None
    if curves.empty:
        return Analysis(curves, _fits_frame([]), None)

    for (n, m1), grp in curves.groupby(["n", "m1"], sort=True):
        n, m1 = int(n), int(m1)
        try:
            f = logit_fit((grp["m"].to_numpy(), grp["p_satisfied"].to_numpy()))
            rows.append(_row("logit", n, m1, beta0=f.beta0, beta1=f.beta1, m_c=f.m_c,
                             r_squared=f.r_squared, points_used=f.points_used))
        except FitError as exc:
            rows.append(_row("logit", n, m1, error=str(exc)))
        for model, col, form in (("bnb_sigmoid", effort, "increasing"),
                                 ("rots_sigmoid", "mean_success", success_form)):
            if col not in grp:
                continue
            y = grp[col].to_numpy(dtype=float)
            if form == "complement":
                y = 1.0 - y
            try:
                s = sigmoid_fit_grid(grp["m"].to_numpy(), y, decreasing=form == "decreasing")
                rows.append(_row(model, n, m1, L=s.L, r=s.r, m_t=s.m_t, r_squared=s.r_squared,
                                 points_used=len(grp), form=form))
            except FitError as exc:
                rows.append(_row(model, n, m1, form=form, error=str(exc)))
    fits = _fits_frame(rows)

    logit = fits[(fits.model == "logit") & fits.error.isna()]
    extra = []
    for n, grp in logit.groupby("n", sort=True):
        try:
            lf = linear_fit(grp["m1"], grp["m_c"])
            extra.append(_row("linear_mc_m1", int(n), beta0=lf.beta0, beta1=lf.beta1,
                              r_squared=lf.r_squared, adj_r_squared=lf.adj_r_squared,
                              points_used=len(grp)))
        except FitError as exc:
            extra.append(_row("linear_mc_m1", int(n), error=str(exc)))
    try:
        power = power_model_fit(logit[["n", "m1", "m_c"]].to_numpy())
        extra.append(_row("power", beta0=power.log_k, alpha1=power.alpha1, alpha2=power.alpha2,
                          adj_r_squared=power.r_squared_log, r_squared_raw=power.r_squared_raw,
                          points_used=power.rows_used))
    except FitError as exc:
        extra.append(_row("power", error=str(exc)))

    mc = {(int(r.n), int(r.m1)): r.m_c for r in logit.itertuples()}
    for model in ("bnb_sigmoid", "rots_sigmoid"):
        sel = fits[(fits.model == model) & fits.error.isna()]
        if sel.empty:
            continue
        mt = {(int(r.n), int(r.m1)): r.m_t for r in sel.itertuples()}
        tag = "corr_" + model.split("_")[0]
        groups = [(None, mt)] + [(n, {c: v for c, v in mt.items() if c[0] == n})
                                 for n in sorted({c[0] for c in mt})]
        for n, sub in groups:
            try:
                cr = critical_correlation(mc, sub)
                extra.append(_row(tag, n, rho=cr.rho, beta0=cr.fit.beta0, beta1=cr.fit.beta1,
                                  r_squared=cr.fit.r_squared, adj_r_squared=cr.fit.adj_r_squared,
                                  points_used=len(cr.cells)))
            except FitError as exc:
                extra.append(_row(tag, n, error=str(exc)))
    return Analysis(curves, _fits_frame(rows + extra), power)


def _power_from_fits(fits: pd.DataFrame):
    sel = fits[(fits.model == "power") & fits.error.isna()]
    if sel.empty:
        return None
    r = sel.iloc[0]
    return PowerFit(float(r.beta0), float(r.alpha1), float(r.alpha2), float(r.adj_r_squared),
                    float(r.r_squared_raw), int(r.points_used))


def write_analysis(result: Analysis, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "curves.csv", out / "fits.csv"]
    result.curves.to_csv(paths[0], index=False, lineterminator="\n", float_format="%.10g")
    result.fits.to_csv(paths[1], index=False, lineterminator="\n", float_format="%.10g")
    return paths


def read_analysis(fits_dir) -> Analysis:
    d = Path(fits_dir)
    curves = pd.read_csv(d / "curves.csv")
    fits = pd.read_csv(d / "fits.csv", dtype={"model": str, "form": str, "error": str, "n": "Int64",
                                               "m1": "Int64", "points_used": "Int64"})
    return Analysis(curves, fits, _power_from_fits(fits))


def summary_lines(result: Analysis) -> list[str]:
    lines = []
    f = result.fits
    if f.empty:
        return ["no data"]
    for r in f[f.model == "logit"].itertuples():
        if isinstance(r.error, str):
            lines.append(f"logit n={r.n} m1={r.m1}: {r.error}")
        else:
            lines.append(f"logit n={r.n} m1={r.m1}: m_c={r.m_c:.3f} R2={r.r_squared:.3f}")
    if result.power is not None:
        p = result.power
        lines.append(f"power: log k={p.log_k:.4f} (k={p.k:.3f}) alpha1={p.alpha1:.4f} "
                     f"alpha2={p.alpha2:.4f} adjR2(log)={p.r_squared_log:.3f} R2(raw)={p.r_squared_raw:.3f}")
    for r in f[f.model.str.startswith("corr_") & f.error.isna()].itertuples():
        scope = "all" if pd.isna(r.n) else f"n={int(r.n)}"
        lines.append(f"{r.model} {scope}: rho={r.rho:.4f} slope={r.beta1:.4f}")
    return lines
