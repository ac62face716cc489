"""Experiment drivers behind the command-line tool.

Each ``cmd_*`` function computes its dataset in memory and returns
:class:`Table` objects; :func:`write_table` renders them as versioned CSV.
Per-task random streams come from ``make_rng(seed, namespace, index)`` so the
output never depends on worker count or completion order.
"""

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import streams
from .channel import ChannelRealization, CorrelationProfile, draw_coefficients
from .config import ExperimentConfig, linear_to_db
from .ddpg import Agent, TrainReport, rollout_gains, train
from .errors import NumericalError, ParameterError
from .lossy import budget_gamma0, gain_threshold
from .outage import MAX_QUADRATURE_ELEMENTS, outage_mc, outage_quadrature

SCHEMA_VERSION = 1
STATS_BATCHES = 50
# Relative slack when checking rewards against the analytic optimum; covers
# rounding in the complex sum only.
BOUND_RTOL = 1e-12


@dataclass
class Table:
    name: str
    columns: tuple
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    text = str(value)
    if any(c in text for c in ',"\n'):
        text = '"' + text.replace('"', '""') + '"'
    return text


def render_table(table: Table) -> str:
    lines = [f"# schema: {table.name} v{SCHEMA_VERSION}"]
    lines += [f"# {key}: {value}" for key, value in table.meta.items()]
    lines.append(",".join(table.columns))
    lines += [",".join(_fmt(v) for v in row) for row in table.rows]
    return "\n".join(lines) + "\n"


def write_table(table: Table, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_table(table))


def _grid_meta(cfg: ExperimentConfig) -> dict:
    gamma0 = "derive" if cfg.system.gamma0 is None else _fmt(linear_to_db(cfg.system.gamma0))
    return {"seed": cfg.seed, "p_s_dbm grid": cfg.sweep.grid_label, "gamma0_db": gamma0}


def _map(fn, items, workers: int) -> list:
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _gamma0_db(gamma0: float) -> float:
    return linear_to_db(gamma0) if gamma0 > 0 else -math.inf


# -- channel statistics ------------------------------------------------------


def _batch_moments(args) -> dict:
    profile1, profile2, n, seed, index = args
    ch = draw_coefficients(profile1, profile2, streams.make_rng(seed, streams.CHANNEL_STATS, index), n=n)
    out = {}
    for hop, g in ((1, ch.g), (2, ch.g_prime)):
        power = np.abs(g) ** 2
        cross = g.T @ g.conj() / n  # E[G_i G_k*]
        p_mean = power.mean(axis=0)
        p_cov = np.cov(power, rowvar=False, bias=True)
        out[hop] = (cross, p_mean, np.atleast_2d(p_cov))
    return out


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    return float(np.mean(values)), float(np.std(values, ddof=1) / math.sqrt(len(values)))


def cmd_channel_stats(cfg: ExperimentConfig, n: int | None = None, workers: int = 1) -> Table:
    """Sample correlations of the drawn coefficients against their targets.

    Samples are split into batches; standard errors are batch-means errors.
    """
    n = cfg.sweep.stats_samples if n is None else n
    if n < STATS_BATCHES:
        raise ParameterError(f"need at least {STATS_BATCHES} samples")
    sizes = [n // STATS_BATCHES + (1 if b < n % STATS_BATCHES else 0) for b in range(STATS_BATCHES)]
    p1, p2 = cfg.system.profile1, cfg.system.profile2
    jobs = [(p1, p2, size, cfg.seed, b) for b, size in enumerate(sizes)]
    batches = _map(_batch_moments, jobs, workers)
    table = Table(
        "channel_stats",
        ("quantity", "hop", "i", "k", "estimate", "std_err", "target"),
        meta={"seed": cfg.seed, "samples": n, "batches": STATS_BATCHES},
    )
    for hop, profile in ((1, p1), (2, p2)):
        lam, sig = profile.lambdas, profile.sigmas
        m = profile.size
        cross = np.array([b[hop][0] for b in batches])
        p_mean = np.array([b[hop][1] for b in batches])
        p_cov = np.array([b[hop][2] for b in batches])
        for i in range(m):
            for k in range(i + 1, m):
                est, se = _mean_se(cross[:, i, k].real / (sig[i] * sig[k]))
                table.rows.append(("complex_corr", hop, i + 1, k + 1, est, se, lam[i] * lam[k]))
        for i in range(m):
            for k in range(i + 1, m):
                rho = p_cov[:, i, k] / np.sqrt(p_cov[:, i, i] * p_cov[:, k, k])
                est, se = _mean_se(rho)
                table.rows.append(("power_corr", hop, i + 1, k + 1, est, se, (lam[i] * lam[k]) ** 2))
        for i in range(m):
            est, se = _mean_se(p_mean[:, i])
            table.rows.append(("mean_square", hop, i + 1, i + 1, est, se, sig[i] ** 2))
    return table


# -- outage sweep ------------------------------------------------------------

METHODS = ("mc", "quad", "both")


def _outage_point(args) -> list:
    cfg, index, method, mc_workers = args
    sys_cfg, sweep = cfg.system, cfg.sweep
    dbm, p_s = sweep.p_s_dbm[index], sweep.p_s[index]
    budget = sys_cfg.budget(p_s, sweep.distortion)
    gamma0 = budget_gamma0(budget)
    h0 = gain_threshold(budget)
    head = (dbm, _gamma0_db(gamma0), h0)
    rows = []
    if method in ("mc", "both"):
        rng = streams.make_rng(cfg.seed, streams.OUTAGE_SWEEP, index)
        est = outage_mc(sys_cfg.profile1, sys_cfg.profile2, h0, sweep.mc_samples, rng, workers=mc_workers)
        rows.append(head + (est.value, est.std_error, "mc", "ok"))
    if method in ("quad", "both"):
        try:
            est = outage_quadrature(sys_cfg.profile1, sys_cfg.profile2, h0, sweep.quad_tol)
            rows.append(head + (est.value, 0.0, "quad", "ok"))
        except NumericalError as exc:
            rows.append(head + (math.nan, math.nan, "quad", f"numerical_error achieved_tol={exc.achieved_tol:.3e}"))
    return rows


def cmd_outage_sweep(cfg: ExperimentConfig, method: str = "both", workers: int = 1) -> Table:
    """Outage probability over the transmit-power grid at the sweep distortion."""
    if method not in METHODS:
        raise ParameterError(f"method must be one of {METHODS}")
    if method != "mc" and cfg.system.m > MAX_QUADRATURE_ELEMENTS:
        raise ParameterError(f"quadrature supports at most {MAX_QUADRATURE_ELEMENTS} elements")
    n = len(cfg.sweep.p_s_dbm)
    if workers > 1:
        jobs = [(cfg, i, method, 1) for i in range(n)]
    else:
        jobs = [(cfg, i, method, workers) for i in range(n)]
    table = Table(
        "outage_sweep",
        ("p_s_dbm", "gamma0_db", "h0", "p_out", "std_err", "method", "status"),
        meta={**_grid_meta(cfg), "distortion": _fmt(cfg.sweep.distortion), "mc_samples": cfg.sweep.mc_samples,
              "quad_tol": _fmt(cfg.sweep.quad_tol)},
    )
    for rows in _map(_outage_point, jobs, workers):
        table.rows.extend(rows)
    return table


# -- DDPG ------------------------------------------------------------------


def draw_realization(cfg: ExperimentConfig, index: int) -> ChannelRealization:
    rng = streams.make_rng(cfg.seed, streams.REALIZATIONS, index)
    return draw_coefficients(cfg.system.profile1, cfg.system.profile2, rng)


def profile_features(profile1: CorrelationProfile, profile2: CorrelationProfile) -> np.ndarray:
    """Correlation and variance vectors of both hops, as optional actor inputs."""
    return np.concatenate([profile1.lambdas, profile2.lambdas, profile1.sigmas**2, profile2.sigmas**2])


@dataclass
class RealizationResult:
    index: int
    report: TrainReport
    rollout: np.ndarray

    @property
    def achieved_gain(self) -> float:
        return float(np.max(self.rollout))

    @property
    def eval_ratio(self) -> float:
        return self.achieved_gain / self.report.optimal_gain

    def tail_ratio(self, last: int = 30) -> float:
        return float(np.median(self.report.ratios[-last:]))

    def bound_violations(self) -> int:
        limit = self.report.optimal_gain * (1.0 + BOUND_RTOL)
        return int(np.count_nonzero(self.report.final_rewards > limit)) + int(
            np.count_nonzero(self.rollout > limit)
        ) + int(self.report.max_reward > limit)


def _train_one(args) -> RealizationResult:
    cfg, index, agent = args
    realization = draw_realization(cfg, index)
    extra = profile_features(cfg.system.profile1, cfg.system.profile2) if cfg.ddpg.profile_inputs else None
    rng = streams.make_rng(cfg.seed, streams.DDPG, index)
    report = train(cfg.ddpg, realization, rng, agent=agent, extra_inputs=extra)
    gains = rollout_gains(report.agent, realization, cfg.ddpg.eval_steps)
    return RealizationResult(index, report, gains)


def train_realizations(cfg: ExperimentConfig, n: int | None = None, workers: int = 1) -> list:
    """Train on ``n`` seeded realizations (default ``ddpg.n_samples``).

    With warm start the agent carries over from one realization to the next,
    which forces sequential execution; cold starts may run in parallel.
    """
    n = cfg.ddpg.n_samples if n is None else n
    if not cfg.ddpg.warm_start:
        return _map(_train_one, [(cfg, k, None) for k in range(n)], workers)
    results, agent = [], None
    for k in range(n):
        result = _train_one((cfg, k, agent))
        agent = result.report.agent
        results.append(result)
    return results


def trace_table(cfg: ExperimentConfig, results: list) -> Table:
    table = Table(
        "ddpg_trace",
        ("realization", "episode", "final_step_reward", "optimal_gain", "ratio"),
        meta={"seed": cfg.seed},
    )
    for res in results:
        rep = res.report
        for ep, (reward, ratio) in enumerate(zip(rep.final_rewards, rep.ratios)):
            table.rows.append((res.index, ep, reward, rep.optimal_gain, ratio))
    return table


def realization_table(cfg: ExperimentConfig, results: list) -> Table:
    table = Table(
        "ddpg_realizations",
        ("realization", "optimal_gain", "achieved_gain", "eval_ratio", "tail_median_ratio", "max_reward",
         "clip_events", "bound_violations", "diverged", "diagnostic"),
        meta={"seed": cfg.seed, "eval_steps": cfg.ddpg.eval_steps},
    )
    for res in results:
        rep = res.report
        table.rows.append((res.index, rep.optimal_gain, res.achieved_gain, res.eval_ratio, res.tail_ratio(),
                           rep.max_reward, rep.clip_events, res.bound_violations(), rep.diverged, rep.diagnostic))
    return table


@dataclass
class TrainOutput:
    episodes: Table
    result: RealizationResult


def cmd_ddpg_train(cfg: ExperimentConfig) -> TrainOutput:
    """Train one agent on realization 0 and tabulate its per-episode rewards."""
    result = _train_one((cfg, 0, None))
    rep = result.report
    table = Table(
        "ddpg_train",
        ("episode", "final_step_reward", "optimal_gain", "ratio"),
        meta={"seed": cfg.seed, "realization": 0},
    )
    for ep, (reward, ratio) in enumerate(zip(rep.final_rewards, rep.ratios)):
        table.rows.append((ep, reward, rep.optimal_gain, ratio))
    return TrainOutput(table, result)


@dataclass
class SweepOutput:
    sweep: Table
    realizations: Table
    trace: Table
    results: list
    kendall_tau: dict
    runtime: float


def outage_rows(cfg: ExperimentConfig, results: list) -> Table:
    """Empirical outage of the trained policies and of the aligned optimum.

    The trained gains do not depend on the transmit power or the distortion,
    so one set of realizations serves every grid point.
    """
    achieved = np.array([r.achieved_gain for r in results])
    optimum = np.array([r.report.optimal_gain for r in results])
    n_div = sum(r.report.diverged for r in results)
    table = Table(
        "ddpg_sweep",
        ("distortion", "p_s_dbm", "gamma0_db", "h0", "ddpg_p_out", "theory_p_out", "gap", "n_realizations",
         "n_diverged", "status"),
        meta={**_grid_meta(cfg), "distortions": " ".join(_fmt(d) for d in cfg.system.distortions)},
    )
    for d in cfg.system.distortions:
        for dbm, p_s in zip(cfg.sweep.p_s_dbm, cfg.sweep.p_s):
            budget = cfg.system.budget(p_s, d)
            h0 = gain_threshold(budget)
            ddpg = float(np.mean(achieved < h0))
            theory = float(np.mean(optimum < h0))
            status = "ok" if ddpg >= theory else "dominance_violation"
            if n_div:
                status += f" diverged={n_div}"
            table.rows.append((d, dbm, _gamma0_db(budget_gamma0(budget)), h0, ddpg, theory, ddpg - theory,
                               len(results), n_div, status))
    return table


def gap_trend(table: Table) -> dict:
    """Kendall tau of the outage gap against transmit power, per distortion."""
    out = {}
    dist = np.array(table.column("distortion"))
    p_s = np.array(table.column("p_s_dbm"))
    gap = np.array(table.column("gap"))
    for d in sorted(set(dist.tolist())):
        sel = dist == d
        if np.ptp(gap[sel]) == 0:
            out[d] = math.nan
        else:
            out[d] = float(stats.kendalltau(p_s[sel], gap[sel]).statistic)
    return out


def cmd_ddpg_sweep(cfg: ExperimentConfig, workers: int = 1, results: list | None = None) -> SweepOutput:
    """Train ``ddpg.n_samples`` agents once and score them over the (P_S, D) grid."""
    start = time.perf_counter()
    if results is None:
        results = train_realizations(cfg, workers=workers)
    sweep = outage_rows(cfg, results)
    return SweepOutput(
        sweep=sweep,
        realizations=realization_table(cfg, results),
        trace=trace_table(cfg, results),
        results=results,
        kendall_tau=gap_trend(sweep),
        runtime=time.perf_counter() - start,
    )
