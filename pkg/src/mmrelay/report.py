"""Sweep drivers and the CSV / figure reporting boundary.

All engine math is in nats; the conversion to bit/s/Hz happens here and only
here, when rows are written or plotted.
"""

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import determ
from .config import dbm_to_watts, watts_to_dbm
from .correlation import build_user_thetas
from .determ import gamma_closed_form, solve_hop
from .mc import half_duplex_rate, monte_carlo_sweep

NATS_TO_BITS = 1.0 / math.log(2.0)

CSV_HEADER = ["p_dbm", "sumrate_mc_af", "stderr_af", "sumrate_de_af",
              "sumrate_mc_df", "stderr_df", "sumrate_de_df"]


@dataclass(frozen=True)
class SweepRow:
    """One power point, rates in nats per channel use."""

    p_dbm: float
    sumrate_mc_af: float
    stderr_af: float
    sumrate_de_af: float
    sumrate_mc_df: float
    stderr_df: float
    sumrate_de_df: float


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    fingerprint: str
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "rows",
                           tuple(sorted(self.rows, key=lambda r: r.p_dbm)))


def det_states_at(cfg, p_watts, thetas_sr, thetas_rd, cache, warm):
    """Per-hop deterministic states with caching across the sweep.

    cache is keyed by (hop-model, alpha); warm carries the previous fixed
    point per hop-model for warm starting along the grid.
    """
    a1, a2 = cfg.alphas_at(p_watts)
    shared_model = thetas_rd is thetas_sr

    def get(hop, thetas, alpha, model_key):
        key = (model_key, alpha, cfg.tau_sr if hop == "sr" else cfg.tau_rd)
        if key not in cache:
            cache[key] = solve_hop(hop, thetas, alpha,
                                   cfg.tau_sr if hop == "sr" else cfg.tau_rd,
                                   m_init=warm.get(model_key))
            warm[model_key] = cache[key].m_o
        return cache[key]

    state_sr = get("sr", thetas_sr, a1, "sr")
    state_rd = get("rd", thetas_rd, a2,
                   "sr" if (shared_model and cfg.tau_sr == cfg.tau_rd) else "rd")
    return state_sr, state_rd


def run_sweep(cfg, power_grid_dbm=None, thetas_sr=None, thetas_rd=None,
              workers=1, cache_dir=None):
    """Monte-Carlo and deterministic sum rates over a power grid (nats)."""
    from .presets import DEFAULT_GRID_DBM

    grid_dbm = list(DEFAULT_GRID_DBM) if power_grid_dbm is None else list(power_grid_dbm)
    grid_w = [dbm_to_watts(p) for p in grid_dbm]
    if thetas_sr is None:
        thetas_sr = build_user_thetas(cfg, cache_dir=cache_dir)
    if thetas_rd is None:
        thetas_rd = thetas_sr

    mc_reports = monte_carlo_sweep(cfg, grid_w, thetas_sr=thetas_sr,
                                   thetas_rd=thetas_rd, workers=workers)

    cache, warm = {}, {}
    rows = []
    for p_dbm, p_w, rep in zip(grid_dbm, grid_w, mc_reports):
        s_sr, s_rd = det_states_at(cfg, p_w, thetas_sr, thetas_rd, cache, warm)
        gam_af = determ.det_sinr_af(s_sr, s_rd, cfg, p_watts=p_w)
        gam_df = determ.det_sinr_df(s_sr, s_rd, cfg, p_watts=p_w)
        rows.append(SweepRow(
            p_dbm=float(p_dbm),
            sumrate_mc_af=rep.sumrate_af, stderr_af=rep.stderr_af,
            sumrate_de_af=float(half_duplex_rate(gam_af).sum()),
            sumrate_mc_df=rep.sumrate_df, stderr_df=rep.stderr_df,
            sumrate_de_df=float(half_duplex_rate(gam_df).sum()),
        ))
    return SweepResult(rows=tuple(rows), fingerprint=cfg.fingerprint(),
                       seed=cfg.seed)


def emit_csv(result, path):
    """Write the sweep as CSV in bit/s/Hz, rows sorted by power."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in result.rows:
            writer.writerow([
                f"{r.p_dbm:.6g}",
                *(f"{v * NATS_TO_BITS:.10g}" for v in (
                    r.sumrate_mc_af, r.stderr_af, r.sumrate_de_af,
                    r.sumrate_mc_df, r.stderr_df, r.sumrate_de_df))])
    return path


def emit_plot(result, path, title=None):
    """Sum-rate figure (AF and DF, simulated markers vs deterministic lines)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    p = [r.p_dbm for r in result.rows]
    to_bits = NATS_TO_BITS
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.errorbar(p, [r.sumrate_mc_af * to_bits for r in result.rows],
                yerr=[r.stderr_af * to_bits for r in result.rows],
                fmt="o", ms=4, color="C0", label="AF simulated")
    ax.plot(p, [r.sumrate_de_af * to_bits for r in result.rows],
            "-", color="C0", label="AF deterministic")
    ax.errorbar(p, [r.sumrate_mc_df * to_bits for r in result.rows],
                yerr=[r.stderr_df * to_bits for r in result.rows],
                fmt="s", ms=4, color="C1", label="DF simulated")
    ax.plot(p, [r.sumrate_de_df * to_bits for r in result.rows],
            "--", color="C1", label="DF deterministic")
    ax.set_xlabel("transmit power (dBm)")
    ax.set_ylabel("sum rate (bit/s/Hz)")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


@dataclass(frozen=True)
class QuadFormRow:
    p_dbm: float
    realized_mean: float       # mean_k of Re h_k^H W hhat_k over trials
    de_iterative: float        # mean_k sqrt(1-tau^2) m_k/(1+m_k)
    de_closed_form: float      # mean_k Gamma_k


def run_quadratic_form_sweep(cfg, power_grid_dbm=None, trials=None,
                             cache_dir=None):
    """Realized signal quadratic form vs its two deterministic equivalents."""
    from . import channels as chan
    from .mc import forms_at, trial_grams
    from .presets import DEFAULT_GRID_DBM

    grid_dbm = list(DEFAULT_GRID_DBM) if power_grid_dbm is None else list(power_grid_dbm)
    n_trials = cfg.trials if trials is None else trials
    thetas = build_user_thetas(cfg, cache_dir=cache_dir)

    grams_list = []
    for t in range(n_trials):
        sr, rd = chan.draw_trial(cfg, thetas, thetas, t)
        grams_list.append(trial_grams(sr, rd))

    cache, warm = {}, {}
    rows = []
    for p_dbm in grid_dbm:
        p_w = dbm_to_watts(p_dbm)
        a1, _ = cfg.alphas_at(p_w)
        realized = np.mean([np.real(np.diag(forms_at(g, a1, a1).A1)).mean()
                            for g in grams_list])
        key = a1
        if key not in cache:
            cache[key] = solve_hop("sr", thetas, a1, cfg.tau_sr,
                                   m_init=warm.get("m"))
            warm["m"] = cache[key].m_o
        state = cache[key]
        gamma_cf = np.mean([gamma_closed_form(t_, cfg.M, a1, cfg.tau_sr)
                            for t_ in thetas])
        rows.append(QuadFormRow(p_dbm=float(p_dbm),
                                realized_mean=float(realized),
                                de_iterative=float(state.de_signal.mean()),
                                de_closed_form=float(gamma_cf)))
    return rows


def emit_quadform_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p_dbm", "realized_mean", "de_iterative", "de_closed_form"])
        for r in rows:
            writer.writerow([f"{r.p_dbm:.6g}", f"{r.realized_mean:.10g}",
                             f"{r.de_iterative:.10g}", f"{r.de_closed_form:.10g}"])
    return path


def emit_quadform_plot(rows, path, title=None):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    p = [r.p_dbm for r in rows]
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.plot(p, [r.realized_mean for r in rows], "o", ms=4, label="simulated")
    ax.plot(p, [r.de_iterative for r in rows], "-", label="deterministic (iterative)")
    ax.plot(p, [r.de_closed_form for r in rows], "--", label="deterministic (closed form)")
    ax.set_xlabel("transmit power (dBm)")
    ax.set_ylabel("signal quadratic form")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def emit_gap_csv(reports, path):
    """Write verification gap statistics as CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["statistic", "dimension", "samples", "median_gap",
                         "max_gap", "decay_exponent"])
        for r in reports:
            writer.writerow([r.statistic, r.dimension, r.samples,
                             f"{r.median_gap:.10g}", f"{r.max_gap:.10g}",
                             "" if r.decay_exponent is None else r.decay_exponent])
    return path
