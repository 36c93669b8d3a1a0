"""Monte-Carlo harness for convergence rates of the Tikhonov estimator.

For each sample size ``n`` in a grid and each replication ``i`` the harness
simulates a path with seed ``base_seed + i``, estimates ``(R0, R1)`` under the
configured observation regime, picks ``alpha`` (fixed or tuned from the rate
``gamma_n``), and records squared Schatten errors of ``rho_hat``, ``R0_hat``
and ``R1_hat`` against the exact model operators.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import csv
import datetime as _dt
import io
import json
import math
from pathlib import Path

import numpy as np

from funcar import __version__
from funcar.arh import lag_cov, simulate
from funcar.config import ExperimentConfig, _p_label, build_model
from funcar.errors import FuncarError, ReplicationError
from funcar.estimators import complete_cov_estimate, sparse_cov_estimate, sparse_observe
from funcar.hilbert import schatten_norm
from funcar.tikhonov import choose_alpha, estimate_rho, population_phi

__all__ = [
    "CellResult",
    "RateReport",
    "gamma_formula",
    "alpha_for",
    "deterministic_bias_sq",
    "run_rate_experiment",
    "fit_loglog_slope",
    "emit_report",
    "load_report",
    "CSV_COLUMNS",
    "REPORT_SCHEMA",
]

REPORT_SCHEMA = "funcar.rate-report/1"
CSV_COLUMNS = ("n", "rep", "p", "alpha", "err_rho_sq", "err_r0_sq", "err_r1_sq")
METRICS = ("rho", "r0", "r1")


def gamma_formula(regime, n, m=None, r=None):
    """Squared-error rate of the covariance estimators.

    ``complete``: ``1/n``. ``sparse``: ``(n m / log n)^(-2r/(2r+1)) + 1/n``,
    which requires ``m >= 1`` and ``r > 1``.
    """
    if not n >= 2:
        raise ValueError(f"n must be >= 2, got {n!r}")
    if regime == "complete":
        return 1.0 / n
    if regime == "sparse":
        if m is None or not m >= 1:
            raise ValueError(f"sparse rate needs m >= 1, got {m!r}")
        if r is None or not r > 1:
            raise ValueError(f"sparse rate needs Sobolev order r > 1, got {r!r}")
        expo = -2.0 * r / (2.0 * r + 1.0)
        return (n * m / math.log(n)) ** expo + 1.0 / n
    raise ValueError(f"unknown observation regime {regime!r}")


def alpha_for(cfg, n):
    """Regularization parameter used at sample size ``n``; also returns gamma_n."""
    gamma = gamma_formula(cfg.gamma_regime, n, cfg.m, cfg.sobolev_order)
    if cfg.alpha_rule == "fixed":
        return cfg.alpha_value, gamma
    return choose_alpha(gamma, cfg.alpha_c), gamma


def deterministic_bias_sq(model, alpha, p=2):
    """``||Phi_alpha - rho*||_p^2`` for the population operators of ``model``."""
    phi = population_phi(lag_cov(model, 0), lag_cov(model, 1), alpha)
    return schatten_norm(phi.coords - model.rho.coords.T, p) ** 2


@dataclass(frozen=True)
class CellResult:
    """Errors for one (n, replication) cell; dicts are keyed by Schatten index."""

    n: int
    rep: int
    seed: int
    alpha: float
    err_rho_sq: dict
    err_r0_sq: dict
    err_r1_sq: dict


def _run_cell(cfg, model, truth, n, rep):
    seed = cfg.base_seed + rep
    try:
        path = simulate(model, n, cfg.burn_in, seed)
        if cfg.regime == "complete":
            cov = complete_cov_estimate(path)
        else:
            design = sparse_observe(path, cfg.m, cfg.noise_sd, seed)
            cov = sparse_cov_estimate(design, cfg.basis, cfg.ridge)
        alpha, _ = alpha_for(cfg, n)
        est = estimate_rho(cov, alpha)
    except Exception as exc:
        raise ReplicationError(n, rep, exc) from exc
    rho, r0, r1 = truth
    d_rho = est.rho_hat.coords - rho
    d_r0 = cov.r0_hat.coords - r0
    d_r1 = cov.r1_hat.coords - r1
    errs = {name: {} for name in METRICS}
    for p in cfg.p_norms:
        errs["rho"][p] = schatten_norm(d_rho, p) ** 2
        errs["r0"][p] = schatten_norm(d_r0, p) ** 2
        errs["r1"][p] = schatten_norm(d_r1, p) ** 2
    return CellResult(n, rep, seed, alpha, errs["rho"], errs["r0"], errs["r1"])


def _run_cells(args):
    cfg, model, truth, cells = args
    return [_run_cell(cfg, model, truth, n, rep) for n, rep in cells]


def fit_loglog_slope(points):
    """OLS slope of ``log(value)`` on ``log(n)`` and its standard error.

    Parameters
    ----------
    points : sequence of (n, value)
        At least three points with positive ``n`` and ``value``.

    Returns
    -------
    (slope, stderr) : tuple of float
    """
    pts = list(points)
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points for a slope fit, got {len(pts)}")
    for i, (n, v) in enumerate(pts):
        if not (v > 0 and math.isfinite(v)):
            raise ValueError(f"point {i}: value must be positive and finite, got {v!r}")
        if not n > 0:
            raise ValueError(f"point {i}: n must be positive, got {n!r}")
    x = np.log([float(n) for n, _ in pts])
    y = np.log([float(v) for _, v in pts])
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0:
        raise ValueError("all points share the same n")
    slope = float(xc @ (y - y.mean()) / sxx)
    resid = y - y.mean() - slope * xc
    dof = len(pts) - 2
    stderr = math.sqrt(float(resid @ resid) / dof / sxx)
    return slope, stderr


def _summarize(values):
    v = np.asarray(values, dtype=float)
    q25, med, q75 = np.percentile(v, [25, 50, 75])
    return {
        "mean": float(v.mean()),
        "median": float(med),
        "q25": float(q25),
        "q75": float(q75),
        "iqr": float(q75 - q25),
    }


@dataclass
class RateReport:
    """Per-cell errors plus per-n aggregates and log-log slopes."""

    config: dict
    n_grid: list
    p_norms: list
    records: list
    tuning: list = field(default_factory=list)
    version: str = __version__
    aggregates: dict = field(init=False)
    slopes: dict = field(init=False)

    def __post_init__(self):
        self.aggregates, self.slopes = _aggregate(self.records, self.n_grid, self.p_norms)

    def stat(self, metric, p, stat="median"):
        """Values of one aggregate statistic along ``n_grid``."""
        key = _p_label(p)
        return np.array([self.aggregates[metric][key][str(n)][stat] for n in self.n_grid])

    def errors(self, metric, p, n):
        attr = f"err_{metric}_sq"
        return np.array([getattr(r, attr)[p] for r in self.records if r.n == n])

    def to_dict(self, timestamp=True):
        out = {
            "schema": REPORT_SCHEMA,
            "version": self.version,
            "config": self.config,
            "n_grid": list(self.n_grid),
            "p_norms": [_p_label(p) for p in self.p_norms],
            "tuning": self.tuning,
            "records": [
                {
                    "n": r.n,
                    "rep": r.rep,
                    "seed": r.seed,
                    "alpha": r.alpha,
                    **{
                        f"err_{m}_sq": {_p_label(p): getattr(r, f"err_{m}_sq")[p] for p in self.p_norms}
                        for m in METRICS
                    },
                }
                for r in self.records
            ],
            "aggregates": self.aggregates,
            "slopes": self.slopes,
        }
        if timestamp:
            out["created"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        return out


def _aggregate(records, n_grid, p_norms):
    aggregates = {m: {} for m in METRICS}
    slopes = {m: {} for m in METRICS}
    for metric in METRICS:
        attr = f"err_{metric}_sq"
        for p in p_norms:
            key = _p_label(p)
            per_n = {}
            for n in n_grid:
                vals = [getattr(r, attr)[p] for r in records if r.n == n]
                if vals:
                    per_n[str(n)] = _summarize(vals)
            aggregates[metric][key] = per_n
            fits = {}
            for stat in ("mean", "median"):
                pts = [(int(n), s[stat]) for n, s in per_n.items()]
                fit = None
                if len(pts) >= 3 and all(v > 0 for _, v in pts):
                    slope, se = fit_loglog_slope(pts)
                    fit = {"slope": slope, "stderr": se}
                fits[stat] = fit
            slopes[metric][key] = fits
    return aggregates, slopes


def run_rate_experiment(cfg, model=None, workers=None):
    """Run every (n, replication) cell of ``cfg`` and aggregate the errors.

    Results do not depend on ``workers``: each cell is seeded from its
    replication index and records are stored in (n, rep) order.
    """
    if not isinstance(cfg, ExperimentConfig):
        raise TypeError("cfg must be an ExperimentConfig")
    if model is None:
        model = build_model(cfg)
    truth = (model.rho.coords, lag_cov(model, 0).coords, lag_cov(model, 1).coords)
    cells = [(n, rep) for n in cfg.n_grid for rep in range(cfg.replications)]
    workers = cfg.workers if workers is None else workers
    if workers <= 1:
        records = _run_cells((cfg, model, truth, cells))
    else:
        chunks = [cells[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_cells, [(cfg, model, truth, c) for c in chunks]))
        records = sorted((r for part in parts for r in part), key=lambda r: (cfg.n_grid.index(r.n), r.rep))
    tuning = []
    for n in cfg.n_grid:
        alpha, gamma = alpha_for(cfg, n)
        tuning.append({"n": n, "gamma": gamma, "alpha": alpha})
    return RateReport(cfg.to_dict(), list(cfg.n_grid), list(cfg.p_norms), records, tuning)


def _csv_text(report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in report.records:
        for p in report.p_norms:
            writer.writerow([
                r.n, r.rep, _p_label(p), repr(float(r.alpha)),
                repr(float(r.err_rho_sq[p])), repr(float(r.err_r0_sq[p])), repr(float(r.err_r1_sq[p])),
            ])
    return buf.getvalue()


def _write(path, text):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write report to {path}: {exc.strerror}") from exc


def emit_report(report, fmt, out_dir, stem="rates"):
    """Write ``<stem>.csv`` and/or ``<stem>.json`` into ``out_dir``.

    CSV columns: ``n, rep, p, alpha, err_rho_sq, err_r0_sq, err_r1_sq``, one
    row per (n, rep, p). JSON holds the full report (schema
    ``funcar.rate-report/1``) including the config echo and slopes.
    """
    formats = [fmt] if isinstance(fmt, str) else list(fmt)
    out_dir = Path(out_dir)
    written = []
    for f in formats:
        if f == "csv":
            path = out_dir / f"{stem}.csv"
            _write(path, _csv_text(report))
        elif f == "json":
            path = out_dir / f"{stem}.json"
            _write(path, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        else:
            raise ValueError(f"unknown report format {f!r}")
        written.append(path)
    return written


def _parse_p(label):
    return math.inf if label == "inf" else float(label)


def load_report(path):
    """Rebuild a :class:`RateReport` from its JSON form."""
    data = json.loads(Path(path).read_text())
    if data.get("schema") != REPORT_SCHEMA:
        raise FuncarError(f"{path}: unsupported report schema {data.get('schema')!r}")
    p_norms = [_parse_p(s) for s in data["p_norms"]]
    records = [
        CellResult(
            n=rec["n"], rep=rec["rep"], seed=rec["seed"], alpha=rec["alpha"],
            **{f"err_{m}_sq": {_parse_p(k): v for k, v in rec[f"err_{m}_sq"].items()} for m in METRICS},
        )
        for rec in data["records"]
    ]
    return RateReport(data["config"], data["n_grid"], p_norms, records, data.get("tuning", []),
                      version=data.get("version", __version__))
