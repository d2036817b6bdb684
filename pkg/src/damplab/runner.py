"""Run a validated ExperimentConfig and persist its outputs.

Every run writes CSV tables, a fit.json summary, the resolved config.json, SVG
plots where applicable, and manifest.json last. CSV rows are sorted and floats
written with repr, so identical configs give byte-identical tables whatever the
worker count.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, serialize
from .damping import sample_on_grid
from .evolution import InitialData, decay_functional, fit_decay, run_decay
from .fitting import fit_exponent, fit_power_law
from .grid import CircleGrid
from .multipliers import certify_point, min_layers, psi_dominance_constant
from .plotting import PlotSeries, emit_plot
from .stationary import ResolventPoint, _peak_task, resolvent_norm_1d, resolvent_norm_2d, resonances

log = logging.getLogger(__name__)

POINT_HEADER = ["q", "E", "k", "beta", "sigma", "variant", "n", "scheme", "norm", "method", "residual"]
CHECK_HEADER = ["lemma", "q", "E", "beta", "case", "lhs", "rhs", "ratio", "pass"]
ENERGY_HEADER = ["t", "energy", "energy_sqrt_times_t_alpha"]
TREND_TOL = 0.05


@dataclass
class RunManifest:
    config_hash: str
    tool_version: str
    started: str
    finished: str
    files: list[str]
    checks: dict[str, bool]
    errors: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.checks.values()) and not self.errors

    def to_dict(self) -> dict:
        return asdict(self) | {"passed": self.passed}


def resolve_jobs(jobs: int | None = None) -> int:
    if jobs is None:
        env = os.environ.get("DAMPLAB_JOBS")
        jobs = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(jobs))


class _Pool:
    """``map`` over a process pool, or the builtin map for a single job."""

    def __init__(self, jobs: int):
        self.jobs = jobs
        self._ex = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None

    def map(self, fn, tasks):
        tasks = list(tasks)
        if self._ex is None or len(tasks) < 2:
            return list(map(fn, tasks))
        chunk = max(1, len(tasks) // (4 * self.jobs))
        return list(self._ex.map(fn, tasks, chunksize=chunk))

    def close(self):
        if self._ex is not None:
            self._ex.shutdown()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(row[h]) for h in header])
    return buf.getvalue()


def _point_row(p: ResolventPoint, cfg: ExperimentConfig) -> dict:
    return {"q": p.q, "E": p.E, "k": p.k, "beta": cfg.beta, "sigma": cfg.sigma, "variant": cfg.variant,
            "n": p.n, "scheme": p.scheme, "norm": p.norm, "method": p.method, "residual": p.residual}


def _sort_points(rows):
    return sorted(rows, key=lambda r: (r["q"], r["E"], -1 if r["k"] is None else r["k"]))


def _slope(qs, values) -> float | None:
    qs, values = np.asarray(qs, float), np.asarray(values, float)
    ok = (values > 0) & np.isfinite(values)
    if ok.sum() < 2 or np.ptp(np.log(qs[ok])) == 0:
        return None
    return fit_power_law(qs[ok], values[ok]).exponent


# resolvent sweeps -----------------------------------------------------------------------------

def _resolvent_q(args):
    q, cfg_json, jobs_inner = args
    cfg = ExperimentConfig.model_validate_json(cfg_json)
    grid = cfg.grid_for(q)
    best, pts = resolvent_norm_2d(q, cfg.profile(), grid, E_cut=cfg.E_cut, q_window=cfg.q_window,
                                  tol=cfg.tol, seed=cfg.seed)
    return q, best, pts, _grid_check(best, cfg)


def _grid_check(best: ResolventPoint, cfg: ExperimentConfig) -> float:
    """Relative change of the winning norm when n doubles."""
    q_eval = best.q_eval
    g2 = CircleGrid(2 * best.n, best.scheme)
    W2 = sample_on_grid(cfg.profile(), g2)
    on_lattice = abs(q_eval - best.q) < 1e-12
    if on_lattice:
        new = resolvent_norm_1d(q_eval, best.E, W2, g2, tol=cfg.tol, seed=cfg.seed).norm
    else:
        lam = resonances(best.q, W2, g2, 1, target=best.E)[0]
        k = best.k
        width = 2 * max(abs(lam.imag), 1e-6)
        q_lo = best.q - cfg.q_window
        e_lo = max(lam.real - width, q_lo * q_lo - k * k, -cfg.E_cut)
        e_hi = min(lam.real + width, best.q**2 - k * k)
        if e_lo >= e_hi:
            return math.nan
        new = _peak_task((best.q, lam, k, e_lo, e_hi, W2, g2, cfg.tol, cfg.seed)).norm
    return abs(new / best.norm - 1)


def _norm1d_task(args):
    q, E, cfg_json = args
    cfg = ExperimentConfig.model_validate_json(cfg_json)
    grid = cfg.grid_for(q)
    return resolvent_norm_1d(q, E, cfg.profile(), grid, tol=cfg.tol, seed=cfg.seed)


def _call_safe(args):
    fn, inner = args
    try:
        return fn(inner)
    except Exception as exc:  # noqa: BLE001
        return RuntimeError(f"{fn.__name__}{_short(inner)}: {type(exc).__name__}: {exc}")


def _short(inner):
    return tuple(x for x in inner if isinstance(x, (int, float, str)) and not (isinstance(x, str) and len(x) > 40))


def _run_resolvent(cfg: ExperimentConfig, pool: _Pool):
    cfg_json = cfg.model_dump_json()
    files, checks, summary, errors = {}, {}, {}, []
    delta = 1.0 / (cfg.beta + 2)
    if cfg.E_policy == "all-modes":
        results = pool.map(_call_safe, [(_resolvent_q, (q, cfg_json, 1)) for q in cfg.q])
        good = [r for r in results if not isinstance(r, Exception)]
        errors += [str(r) for r in results if isinstance(r, Exception)]
        best_rows = [_point_row(b, cfg) for _, b, _, _ in good]
        mode_rows = [_point_row(p, cfg) for _, _, pts, _ in good for p in pts]
        files["points.csv"] = to_csv(POINT_HEADER, _sort_points(best_rows))
        files["modes.csv"] = to_csv(POINT_HEADER, _sort_points(mode_rows))
        qs = [q for q, *_ in good]
        norms = [b.norm for _, b, _, _ in good]
        kmax = {q: int(math.floor(math.sqrt(q * q + cfg.E_cut))) for q in qs}
        lattice = [max(p.norm for p in pts[: kmax[q] + 1]) for q, _, pts, _ in good]
        summary["grid_doubling_change"] = {_num(q): gc for q, _, _, gc in good}
        summary["lattice_norms"] = {_num(q): v for q, v in zip(qs, lattice)}
        summary["lattice_exponent"] = _slope(qs, lattice)
        summary["argmax"] = {_num(q): {"k": b.k, "E": b.E, "q_eval": b.q_eval} for q, b, _, _ in good}
        neg = [p for _, _, pts, _ in good for p in pts if p.E < 0]
        checks["negative_E_bound"] = all(p.norm <= (1 + 1e-6) / abs(p.E) for p in neg)
        if len(qs) >= 3:
            fit = fit_exponent(zip(qs, norms))
            summary["fit"] = fit.to_dict()
            files["norm_vs_q.svg"] = emit_plot(
                PlotSeries(np.array(qs), np.array(norms), cfg.beta, fit,
                           f"torus resolvent norm, beta={cfg.beta:g}, sigma={cfg.sigma:.4g}"), "resolvent")
    else:
        tasks = [(q, E) for q in cfg.q for E in cfg.energies(q)]
        results = pool.map(_call_safe, [(_norm1d_task, (q, E, cfg_json)) for q, E in tasks])
        pairs = [(t, r) for t, r in zip(tasks, results) if not isinstance(r, Exception)]
        errors += [str(r) for r in results if isinstance(r, Exception)]
        files["points.csv"] = to_csv(POINT_HEADER, _sort_points([_point_row(p, cfg) for _, p in pairs]))
        fits = {}
        for j, value in enumerate(cfg.E_values):
            series = [(t[0], p) for t, p in pairs if cfg.energies(t[0])[j] == t[1]]
            qs = [q for q, _ in series]
            key = f"E={value:g}" if cfg.E_policy == "fixed" else f"E={value:g}q^2"
            entry = {"exponent": _slope(qs, [p.norm for _, p in series])}
            if cfg.E_policy == "q2-fraction":
                ratio = [p.norm**2 * p.E / q ** (2 * delta) for q, p in series]
                entry["ratio_exponent"] = _slope(qs, ratio)
                entry["max_ratio"] = max(ratio) if ratio else None
                if entry["ratio_exponent"] is not None:
                    checks[f"main_estimate_no_upward_trend[{key}]"] = entry["ratio_exponent"] <= TREND_TOL
            fits[key] = entry
        summary["fits"] = fits
        neg = [p for _, p in pairs if p.E < 0]
        checks["negative_E_bound"] = all(p.norm <= (1 + 1e-6) / abs(p.E) for p in neg)
    summary["reference_exponent"] = delta
    return files, checks, summary, errors


def _run_esmall(cfg: ExperimentConfig, pool: _Pool):
    files, checks, summary, errors = _run_resolvent(cfg, pool)
    uniform = {}
    for key, entry in summary.get("fits", {}).items():
        s = entry["exponent"]
        uniform[key] = s is not None and abs(s) <= TREND_TOL
    summary["uniform"] = uniform
    if "E=0" in uniform:
        checks["uniform_bound_at_E=0"] = uniform["E=0"]
    return files, checks, summary, errors


# lemma certification --------------------------------------------------------------------------

def _certify_task(args):
    q, E, case, cfg_json, N = args
    cfg = ExperimentConfig.model_validate_json(cfg_json)
    return certify_point(q, E, cfg.profile(), cfg.grid_for(q), case, cfg.seed, N)


def _run_lemmas(cfg: ExperimentConfig, pool: _Pool):
    cfg_json = cfg.model_dump_json()
    N = cfg.N
    if N is None:
        N = max(min_layers(cfg.beta), 1 if "3" in cfg.cases else 0)
    tasks = [(q, E, case, cfg_json, N) for q in cfg.q for E in cfg.energies(q) for case in cfg.cases]
    results = pool.map(_call_safe, [(_certify_task, t) for t in tasks])
    errors = [str(r) for r in results if isinstance(r, Exception)]
    reports = [rep for r in results if not isinstance(r, Exception) for rep in r]
    rows = sorted((r.row() for r in reports), key=lambda r: (r["lemma"], r["case"], r["q"], r["E"]))
    files = {"checks.csv": to_csv(CHECK_HEADER, rows)}
    checks = {"wu_roundoff_exact": all(r.passed for r in reports if r.lemma == "wu")}
    slopes = {}
    for lemma in ("psi", "lemma_mu", "lemma_fuwfu"):
        for case in cfg.cases:
            for j, fr in enumerate(cfg.E_values):
                pts = [r for r in reports if r.lemma == lemma and r.case == case
                       and math.isclose(r.E, cfg.energies(r.q)[j])]
                if len(pts) < 2:
                    continue
                s = _slope([r.q for r in pts], [r.ratio for r in pts])
                key = f"{lemma}[case={case},E={fr:g}{'q^2' if cfg.E_policy == 'q2-fraction' else ''}]"
                slopes[key] = {"exponent": s, "max_ratio": max(r.ratio for r in pts)}
                checks[f"{key}_no_upward_trend"] = s is not None and s <= TREND_TOL
                checks[f"{key}_finite"] = all(math.isfinite(r.ratio) for r in pts)
    grid = cfg.grid_for(cfg.q[0])
    summary = {"ratio_trends": slopes, "N": N,
               "psi_dominance_constant": psi_dominance_constant(grid, cfg.profile())}
    return files, checks, summary, errors


# decay runs -----------------------------------------------------------------------------------

def _decay_task(args):
    k, cfg_json = args
    cfg = ExperimentConfig.model_validate_json(cfg_json)
    grid = cfg.grid_for()
    if cfg.data.family == "gaussian-strip":
        data = InitialData.gaussian_strip(grid, k, cfg.data.width)
    else:
        data = InitialData.plane_wave(grid, cfg.data.m, k)
    series = run_decay(cfg.profile(), data, cfg.T, cfg.dt, cfg.sample_stride)
    return k, series.t, series.energy, series.data_norm


def _run_decay(cfg: ExperimentConfig, pool: _Pool):
    from .evolution import DecaySeries

    cfg_json = cfg.model_dump_json()
    alpha = (cfg.beta + 2) / (cfg.beta + 3)
    results = pool.map(_call_safe, [(_decay_task, (k, cfg_json)) for k in cfg.data.k])
    errors = [str(r) for r in results if isinstance(r, Exception)]
    good = sorted((r for r in results if not isinstance(r, Exception)), key=lambda r: r[0])
    files, checks, members = {}, {}, {}
    single = len(cfg.data.k) == 1
    for k, t, e, dn in good:
        series = DecaySeries(t, e, dn)
        rows = [{"t": ti, "energy": ei, "energy_sqrt_times_t_alpha": ti**alpha * math.sqrt(max(ei, 0.0))}
                for ti, ei in zip(t, e)]
        files["energy.csv" if single else f"energy_k{k}.csv"] = to_csv(ENERGY_HEADER, rows)
        entry = {"data_norm": dn, "monotone": series.is_monotone()}
        try:
            entry["fit"] = fit_decay(series, tuple(cfg.fit_window), alpha).to_dict()
        except ValueError as exc:
            entry["fit"] = None
            entry["fit_error"] = str(exc)
        entry["sup_functional"] = decay_functional(series, alpha, *cfg.sup_window)
        members[str(k)] = entry
        checks[f"energy_monotone[k={k}]"] = entry["monotone"]
        checks[f"sup_functional_finite[k={k}]"] = math.isfinite(entry["sup_functional"])
    summary = {"reference_alpha": alpha, "members": members}
    if len(good) >= 2:
        ks = [k for k, *_ in good]
        sups = [members[str(k)]["sup_functional"] for k in ks]
        trend = _slope(ks, sups)
        summary["sup_trend_exponent"] = trend
        checks["sup_functional_no_upward_trend_in_k"] = trend is not None and trend <= TREND_TOL
    fitted = {k: m["fit"]["exponent"] for k, m in members.items() if m.get("fit")}
    if fitted:
        slowest = min(fitted, key=fitted.get)
        summary["slowest_member"] = {"k": int(slowest), "alpha": fitted[slowest]}
        k, t, e, dn = next(r for r in good if str(r[0]) == slowest)
        fit = fit_decay(DecaySeries(t, e, dn), tuple(cfg.fit_window))
        files["energy_vs_t.svg"] = emit_plot(
            PlotSeries(t[1:], np.sqrt(e[1:]), cfg.beta, fit,
                       f"energy decay, k={k}, beta={cfg.beta:g}"), "decay")
    return files, checks, summary, errors


RUNNERS = {
    "resolvent-sweep": _run_resolvent,
    "esmall-probe": _run_esmall,
    "lemma-certify": _run_lemmas,
    "decay-run": _run_decay,
}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def run(cfg: ExperimentConfig, jobs: int | None = None, out: str | os.PathLike | None = None) -> RunManifest:
    """Execute the experiment, write its files under the output directory and return the manifest."""
    outdir = Path(out if out is not None else cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _clear_previous(outdir)
    started = _now()
    jobs = resolve_jobs(jobs)
    log.info("running %s with %d job(s) into %s", cfg.kind, jobs, outdir)
    with _Pool(jobs) as pool:
        files, checks, summary, errors = RUNNERS[cfg.kind](cfg, pool)
    checks["no_worker_failures"] = not errors
    files["config.json"] = serialize(cfg) + "\n"
    files["fit.json"] = json.dumps(_jsonable(summary), sort_keys=True, indent=2) + "\n"
    for name, text in files.items():
        (outdir / name).write_text(text)
    manifest = RunManifest(cfg.config_hash(), __version__, started, _now(),
                           sorted([*files, "manifest.json"]), checks, errors)
    (outdir / "manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")
    return manifest


def _clear_previous(outdir: Path):
    old = outdir / "manifest.json"
    if not old.exists():
        return
    try:
        listed = json.loads(old.read_text()).get("files", [])
    except (OSError, json.JSONDecodeError):
        return
    for name in listed:
        p = outdir / name
        if p.is_file() and p.parent == outdir:
            p.unlink()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
