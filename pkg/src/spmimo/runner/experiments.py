"""Sweep execution and result persistence.

Work is split into (sweep point, deployment) units. Each unit is evaluated
independently from seeded substreams, so results do not depend on worker
count or completion order. Finished units are appended to a checkpoint file
keyed by the spec hash; a rerun with the same spec skips them.
"""
from __future__ import annotations

import csv
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from .._accel import backend_name
from ..asymptotics import rate_limit
from ..bounds import BoundInputs, best_delta, best_tau_p, lb_rate
from ..closed_form import LsfSnapshot, network_sinr, network_unit_aggregates
from ..core import Scheme, config_hash
from ..energy import ee
from ..geometry import sample_network_retry
from ..montecarlo.engine import (LinkSet, empirical_sinr_snapshot, evaluate_sp,
                                 sp_features)
from ..montecarlo.stats import t_quantile
from ..optimizer import optimize_delta, optimize_tau_p
from .specfile import ExperimentSpec

__all__ = ["RATE_COLUMNS", "EXTRA_COLUMNS", "RunResult", "evaluate_network", "run_experiment",
           "aggregate_point"]

RATE_COLUMNS = ("sweep_value", "mean_rate", "ci_low", "ci_high", "bound_value",
                "opt_tau_p_or_delta", "ee")
EXTRA_COLUMNS = ("mode", "closed_form_rate", "ee_bound", "bound_opt", "n_networks")
TERM_NAMES = ("pilot_contamination", "extra_coherent", "non_coherent", "noise")

_SCHEME = {"rp_k": Scheme.RP, "rp_opt": Scheme.RP, "sp_nosub": Scheme.SP_NOSUB,
           "sp_estsub": Scheme.SP_ESTSUB, "sp_perfsub": Scheme.SP_PERFSUB}
_CF_SCHEMES = ("rp_k", "rp_opt", "sp_nosub", "sp_perfsub")


# ------------------------------------------------------ per-deployment work

def _cf_rp(net, cfg, unit, optimize):
    """Closed-form RP rates (n, K), per-cell tau_p and per-UE SINR terms."""
    K = cfg.K
    if not optimize:
        terms = network_sinr(net, cfg, Scheme.RP, unit_agg=unit, tau_p=K)
        return (1.0 - K / cfg.tau_c) * np.log2(1.0 + terms.sinr), np.full(net.n_bs, K), terms
    taus = range(K, cfg.tau_c + 1)
    table = np.stack([(1.0 - t / cfg.tau_c)
                      * np.log2(1.0 + network_sinr(net, cfg, Scheme.RP, unit_agg=unit,
                                                   tau_p=t).sinr) for t in taus])
    cell_mean = table.mean(axis=2)
    opt = np.array([optimize_tau_p(lambda t, l=l: cell_mean[t - K, l], K, cfg.tau_c)[0]
                    for l in range(net.n_bs)])
    rates = table[opt - K, np.arange(net.n_bs)]
    terms = [network_sinr(net, cfg, Scheme.RP, unit_agg=unit, tau_p=int(t)) for t in opt]
    return rates, opt, _pick_rows(terms)


def _pick_rows(per_cell_terms):
    """Row ``l`` of the ``l``-th SinrTerms, restacked into one (n, K) set."""
    first = per_cell_terms[0]
    out = {}
    for name in ("coherent_gain", "pilot_contamination", "extra_coherent", "non_coherent",
                 "noise_term"):
        out[name] = np.stack([getattr(t, name)[l] for l, t in enumerate(per_cell_terms)])
    return type(first)(**out)


def _cf_sp(net, cfg, unit, scheme, grid_step):
    cache = {}

    def at(d):
        if d not in cache:
            cache[d] = network_sinr(net, cfg, scheme, unit_agg=unit, delta=d)
        return cache[d]

    opt = np.array([optimize_delta(lambda d, l=l: float(np.log2(1.0 + at(d).sinr[l]).mean()),
                                   grid_step)[0] for l in range(net.n_bs)])
    terms = _pick_rows([at(float(d)) for d in opt])
    return np.log2(1.0 + terms.sinr), opt, terms


def _term_ratios(terms):
    """Mean over UEs of each interference term divided by the coherent gain."""
    g = terms.coherent_gain
    return {name: float(np.mean(getattr(terms, attr) / g))
            for name, attr in zip(TERM_NAMES, ("pilot_contamination", "extra_coherent",
                                               "non_coherent", "noise_term"))}


def _estsub_opt(feat, c_unit, grid_step):
    """Power split maximizing the plug-in mean rate of the simulated UEs."""
    def objective(d):
        m = evaluate_sp(feat, d, Scheme.SP_ESTSUB).mean(axis=0)
        h2, h4, wr, wi, w2 = (m[:, i] for i in range(5))
        c = (1.0 - d) * c_unit
        s = c * h2 ** 2 / (c * (h4 - h2 ** 2) + w2 - wr ** 2 - wi ** 2)
        return float(np.log2(1.0 + s).mean())
    return optimize_delta(objective, grid_step)


def evaluate_network(spec: ExperimentSpec, point: int, index: int) -> dict:
    """Evaluate every scheme of ``spec`` on deployment ``index`` at sweep point ``point``.

    Closed-form rates cover every UE of the deployment with per-cell optimal
    ``tau_p`` or ``delta``. Monte Carlo covers the UEs of cell 0; its
    parameters are the closed-form optima of that cell, except for estimated
    subtraction whose split is optimized on the simulated draws.
    """
    value = spec.sweep_values[point]
    cfg = spec.config_at(value)
    net = sample_network_retry(cfg, spec.seed, index, n_av=spec.n_av)
    unit = network_unit_aggregates(net)
    out = {"point": point, "index": index, "n_bs": int(net.n_bs), "schemes": {}}
    cf = {}
    for name in spec.schemes:
        if name in ("rp_k", "rp_opt"):
            cf[name] = _cf_rp(net, cfg, unit, optimize=name == "rp_opt")
        elif name in ("sp_nosub", "sp_perfsub"):
            cf[name] = _cf_sp(net, cfg, unit, _SCHEME[name], spec.delta_step)

    feat = None
    links = None
    for name in spec.schemes:
        rec = {}
        if name in cf:
            rates, opt, terms = cf[name]
            rec["cf_rate"] = float(rates.mean())
            rec["cf_opt"] = float(opt.mean())
            rec["cf_ue_rates"] = [float(x) for x in rates.reshape(-1)]
            rec["terms"] = _term_ratios(terms)
        if name in spec.mc_schemes and spec.n_fading > 0:
            scheme = _SCHEME[name]
            stream = (index,)
            if scheme is Scheme.RP:
                tp = int(cf[name][1][0])
                c = cfg.replace(tau_p=tp)
                snap = LsfSnapshot.from_network(net, c, scheme, cell=0)
                est = empirical_sinr_snapshot(scheme, snap, c, spec.n_fading, spec.seed,
                                              stream=(1,) + stream)
                mc_rates = est.rates(1.0 - tp / cfg.tau_c)
                rec["mc_opt"] = float(tp)
            else:
                if feat is None:
                    snap = LsfSnapshot.from_network(net, cfg, scheme, cell=0)
                    links = LinkSet.from_snapshot(snap, cfg, scheme)
                    feat = sp_features(links, cfg.M, cfg.tau_c, spec.n_fading, spec.seed,
                                       stream=(2,) + stream)
                if scheme is Scheme.SP_ESTSUB:
                    d = _estsub_opt(feat, feat.c_unit, spec.delta_step_mc)[0]
                else:
                    d = float(cf[name][1][0])
                c = cfg.replace(delta=d)
                snap = LsfSnapshot.from_network(net, c, scheme, cell=0)
                est = empirical_sinr_snapshot(scheme, snap, c, spec.n_fading, spec.seed,
                                              features=feat)
                mc_rates = est.rates()
                rec["mc_opt"] = float(d)
            rec["mc_rate"] = float(np.mean(mc_rates))
            rec["mc_ue_rates"] = [float(x) for x in mc_rates]
        out["schemes"][name] = rec

    if spec.sweep_var == "M" and point == 0:
        lim = {}
        for name in ("rp_k", "sp_nosub", "sp_perfsub"):
            scheme = _SCHEME[name]
            c = cfg.replace(tau_p=cfg.K)
            snap = LsfSnapshot.from_network(net, c, scheme, cell=0)
            r = rate_limit(scheme, snap, c)
            lim[name] = {"rate_bps": r.rate_limit_bps, "zeta_max": r.zeta_max}
        out["limits"] = lim
    return out


# ------------------------------------------------------------- aggregation

def _t_interval(x):
    x = np.asarray(x, dtype=float)
    m = float(x.mean())
    if x.size < 2:
        return m, m, m, 0.0
    half = t_quantile(0.95, x.size - 1) * float(x.std(ddof=1)) / math.sqrt(x.size)
    return m, m - half, m + half, half


def _bound(name, cfg):
    b = BoundInputs.from_config(cfg)
    if name == "rp_k":
        return lb_rate(Scheme.RP, b.replace(tau_p=cfg.K)), float(cfg.K)
    if name == "rp_opt":
        t, v = best_tau_p(b)
        return v, float(t)
    if name in ("sp_nosub", "sp_perfsub"):
        d, v = best_delta(_SCHEME[name], b)
        return v, float(d)
    return math.nan, math.nan


def aggregate_point(spec: ExperimentSpec, point: int, records: list) -> dict:
    """One row per scheme from the deployment records of one sweep point."""
    value = spec.sweep_values[point]
    cfg = spec.config_at(value)
    scale = cfg.bandwidth * (cfg.K if spec.per_cell_sum else 1)
    rows = {}
    for name in spec.schemes:
        recs = [r["schemes"][name] for r in records]
        mc = name in spec.mc_schemes and spec.n_fading > 0
        key = "mc" if mc else "cf"
        mean, lo, hi, half = _t_interval([r[f"{key}_rate"] for r in recs])
        opt = float(np.mean([r[f"{key}_opt"] for r in recs]))
        cf_rate = (float(np.mean([r["cf_rate"] for r in recs])) * scale
                   if "cf_rate" in recs[0] else math.nan)
        bound, bound_opt = _bound(name, cfg)
        scheme = _SCHEME[name]
        per_ue_bps = mean * cfg.bandwidth
        rows[name] = {
            "sweep_value": value if value is not None else cfg.M,
            "mean_rate": mean * scale, "ci_low": lo * scale, "ci_high": hi * scale,
            "bound_value": bound * scale, "opt_tau_p_or_delta": opt,
            "ee": ee(scheme, per_ue_bps, cfg, spec.power_model, source=key).ee,
            "mode": "mc" if mc else "closed_form",
            "closed_form_rate": cf_rate,
            "ee_bound": (ee(scheme, bound * cfg.bandwidth, cfg, spec.power_model,
                            source="bound").ee if math.isfinite(bound) else math.nan),
            "bound_opt": bound_opt,
            "n_networks": len(recs),
            "_ci_half": half * scale,
        }
    return rows


# ----------------------------------------------------------------- output

def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, header: list, rows: list):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# spmimo {__version__}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


def _gnuplot(spec: ExperimentSpec, files: dict) -> str:
    xlabel = {"M": "M (antennas)", "tau_c": "tau_c (samples)", "snr_db": "SNR (dB)",
              "K": "K (UEs per cell)", None: "M"}[spec.sweep_var]
    lines = ["set datafile separator ','", "set key autotitle columnhead",
             "set key left top", f"set xlabel '{xlabel}'", "set grid",
             "set terminal pngcairo size 900,600",
             f"set output '{spec.name}_rate.png'",
             "set ylabel 'rate (bit/s)'"]
    plots = []
    for name, fname in files.items():
        plots.append(f"'{fname}' skip 1 using 1:2:3:4 with yerrorlines title '{name}'")
        plots.append(f"'{fname}' skip 1 using 1:5 with lines dashtype 2 "
                     f"title '{name} bound'")
    lines.append("plot " + ", \\\n     ".join(plots))
    lines += [f"set output '{spec.name}_ee.png'", "set ylabel 'energy efficiency (bit/J)'"]
    lines.append("plot " + ", \\\n     ".join(
        f"'{f}' skip 1 using 1:7 with linespoints title '{n}'" for n, f in files.items()))
    return "\n".join(lines) + "\n"


def _gnuplot_cdf(files: dict) -> str:
    lines = ["set datafile separator ','", "set terminal pngcairo size 900,600",
             "set output 'cdf.png'", "set xlabel 'rate (bit/s)'", "set ylabel 'CDF'",
             "set key left top", "set grid"]
    lines.append("plot " + ", \\\n     ".join(
        f"'{f}' skip 2 using 1:2 with lines title '{n}'" for n, f in files.items()))
    return "\n".join(lines) + "\n"


def _gnuplot_bars() -> str:
    return "\n".join([
        "set datafile separator ','", "set terminal pngcairo size 900,600",
        "set output 'interference.png'", "set style data histograms",
        "set style histogram rowstacked", "set style fill solid border -1",
        "set ylabel 'term / coherent gain'", "set key outside",
        "plot for [i=2:5] 'interference.csv' skip 1 using i:xtic(1) title columnhead(i)",
    ]) + "\n"


# -------------------------------------------------------------- invariants

def check_invariants(spec: ExperimentSpec, table: dict) -> list:
    """Row-level checks: CI brackets the mean; bounds do not exceed the mean."""
    out = []
    for name, rows in table.items():
        for r in rows:
            ok = r["ci_low"] <= r["mean_rate"] <= r["ci_high"]
            out.append({"check": "ci_brackets_mean", "scheme": name,
                        "sweep_value": r["sweep_value"], "passed": bool(ok)})
            if math.isfinite(r["bound_value"]):
                slack = r["mean_rate"] + r["_ci_half"] - r["bound_value"]
                out.append({"check": "bound_below_mean", "scheme": name,
                            "sweep_value": r["sweep_value"], "passed": bool(slack >= 0),
                            "observed": r["bound_value"],
                            "limit": r["mean_rate"] + r["_ci_half"]})
    return out


# -------------------------------------------------------------------- run

@dataclass
class RunResult:
    out_dir: Path
    table: dict
    files: list
    invariants: list
    manifest: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c["passed"] for c in self.invariants)


def _load_checkpoint(path: Path, spec_hash: str) -> dict:
    done = {}
    if not path.exists():
        return done
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                continue  # torn final line from an interrupted run
            if rec.get("spec_hash") == spec_hash and rec.get("version") == __version__:
                done[(rec["result"]["point"], rec["result"]["index"])] = rec["result"]
    return done


def _work(args):
    spec, point, index = args
    return evaluate_network(spec, point, index)


def run_experiment(spec: ExperimentSpec, out_dir, *, threads: int = 1, resume: bool = True,
                   progress=None) -> RunResult:
    """Run ``spec`` and write CSV, gnuplot and manifest files under ``out_dir/spec.name``."""
    t0 = time.time()
    out = Path(out_dir) / spec.name
    out.mkdir(parents=True, exist_ok=True)
    h = spec.spec_hash()
    ckpt = out / "checkpoint.jsonl"
    done = _load_checkpoint(ckpt, h) if resume else {}
    if not resume and ckpt.exists():
        ckpt.unlink()
    todo = [(spec, p, i) for p in range(len(spec.sweep_values))
            for i in range(spec.n_networks) if (p, i) not in done]

    with open(ckpt, "a", encoding="utf-8") as fh:
        def record(res):
            done[(res["point"], res["index"])] = res
            fh.write(json.dumps({"spec_hash": h, "version": __version__, "result": res}) + "\n")
            fh.flush()
            if progress:
                progress(len(done), len(spec.sweep_values) * spec.n_networks)

        if threads > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=threads) as ex:
                for res in ex.map(_work, todo, chunksize=1):
                    record(res)
        else:
            for job in todo:
                record(_work(job))

    table = {name: [] for name in spec.schemes}
    per_point = []
    for p in range(len(spec.sweep_values)):
        recs = [done[(p, i)] for i in range(spec.n_networks)]
        per_point.append(recs)
        for name, row in aggregate_point(spec, p, recs).items():
            table[name].append(row)

    files = []
    header = list(RATE_COLUMNS + EXTRA_COLUMNS)
    rate_files = {}
    for name, rows in table.items():
        fname = f"{name}.csv"
        _write_csv(out / fname, header, [[r[c] for c in header] for r in rows])
        rate_files[name] = fname
        files.append(fname)
    (out / "plot.gp").write_text(_gnuplot(spec, rate_files), encoding="utf-8")
    files.append("plot.gp")

    if spec.scenario == "cdf":
        cdf_files = {}
        for name in spec.schemes:
            key = "mc_ue_rates" if name in spec.mc_schemes and spec.n_fading else "cf_ue_rates"
            r = np.sort(np.concatenate([rec["schemes"][name][key] for rec in per_point[0]]))
            r = r * spec.config_at(spec.sweep_values[0]).bandwidth
            fname = f"cdf_{name}.csv"
            _write_csv(out / fname, ["rate_bps", "cdf"],
                       [[float(x), (i + 1) / r.size] for i, x in enumerate(r)])
            cdf_files[name] = fname
            files.append(fname)
        (out / "cdf.gp").write_text(_gnuplot_cdf(cdf_files), encoding="utf-8")
        files.append("cdf.gp")

    if spec.scenario == "interference":
        rows = []
        for name in spec.schemes:
            if name not in _CF_SCHEMES:
                continue
            ratios = {t: float(np.mean([rec["schemes"][name]["terms"][t]
                                        for rec in per_point[0]])) for t in TERM_NAMES}
            coh = ratios["pilot_contamination"] + ratios["extra_coherent"]
            nonc = ratios["non_coherent"] + ratios["noise"]
            rows.append([name] + [ratios[t] for t in TERM_NAMES] + [coh, nonc])
        _write_csv(out / "interference.csv",
                   ["scheme", *TERM_NAMES, "coherent_total", "noncoherent_total"], rows)
        (out / "interference.gp").write_text(_gnuplot_bars(), encoding="utf-8")
        files += ["interference.csv", "interference.gp"]

    if "limits" in per_point[0][0]:
        rows = []
        for name in ("rp_k", "sp_nosub", "sp_perfsub"):
            lims = [rec["limits"][name] for rec in per_point[0]]
            finite = [x["rate_bps"] for x in lims if math.isfinite(x["rate_bps"])]
            rows.append([name, float(np.mean(finite)) if finite else math.inf,
                         float(np.mean([x["zeta_max"] for x in lims])), len(finite)])
        _write_csv(out / "limits.csv", ["scheme", "limit_rate_bps", "mean_zeta_max",
                                        "n_bounded"], rows)
        files.append("limits.csv")

    invariants = check_invariants(spec, table)
    manifest = {
        "tool": "spmimo", "version": __version__, "spec_hash": h, "seed": spec.seed,
        "spec": spec.to_dict(),
        "config_hashes": {repr(v): config_hash(spec.config_at(v))
                          for v in spec.sweep_values},
        "n_networks": spec.n_networks, "n_fading": spec.n_fading, "n_av": spec.n_av,
        "modes": {n: ("mc" if n in spec.mc_schemes and spec.n_fading else "closed_form")
                  for n in spec.schemes},
        "optimization": {"closed_form": "per deployment and cell",
                         "mc": "per deployment, cell 0",
                         "bound": "per sweep point on the bound itself"},
        "backend": backend_name(), "threads": threads,
        "python": platform.python_version(), "numpy": np.__version__,
        "files": files, "invariants_passed": all(c["passed"] for c in invariants),
        "invariants": invariants, "elapsed_s": round(time.time() - t0, 3),
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, default=str)
    return RunResult(out, table, files, invariants, manifest)
