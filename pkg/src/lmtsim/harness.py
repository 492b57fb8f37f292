"""Config-driven experiment runner.

Builds topology, oracle, and method from an :class:`ExperimentConfig`,
runs ``T`` communication rounds over several seeded trials, aggregates the
per-round metrics across trials, and writes a ``trace.csv`` plus plain
text metadata.  Sweeps rerun the experiment along one axis (local steps,
agent count, or method) and summarize final-window behaviour.

Everything is deterministic given (config, seed): random streams are
derived per (trial, agent, round, local step), and trials are aggregated
in fixed order.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace

import numpy as np

from . import baselines as bl
from . import diagnostics as dg
from . import lmt
from . import objectives as obj
from . import topology as tp
from .config import ConfigError, ExperimentConfig
from .streams import TrialStreams

_VERSION = "0.1.0"


@dataclass
class ResultTable:
    """Per-round metrics averaged across trials (one run of one method)."""

    label: str
    fingerprint: str
    seed: int
    columns: dict[str, np.ndarray]

    @property
    def rounds(self) -> int:
        return len(self.columns["t"])

    def final_window(self, metric: str, frac: float = 0.1) -> float:
        """Mean of ``metric`` over the last ``frac`` fraction of rounds."""
        col = self.columns[metric]
        k = max(1, math.ceil(frac * len(col)))
        return float(np.mean(col[-k:]))

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(",".join(dg.TRACE_COLUMNS) + "\n")
            for row in range(self.rounds):
                cells = []
                for name in dg.TRACE_COLUMNS:
                    v = self.columns[name][row]
                    cells.append(str(int(v)) if name == "t" else format(float(v), ".17g"))
                fh.write(",".join(cells) + "\n")

    @staticmethod
    def from_csv(path: str, label: str | None = None) -> "ResultTable":
        with open(path, "r", encoding="ascii") as fh:
            header = fh.readline().strip().split(",")
            if tuple(header) != dg.TRACE_COLUMNS:
                raise ValueError(f"{path}: unexpected trace header {header}")
            rows = [line.strip().split(",") for line in fh if line.strip()]
        if not rows:
            raise ValueError(f"{path}: empty trace")
        data = np.array([[float(c) for c in row] for row in rows])
        columns = {name: data[:, j] for j, name in enumerate(dg.TRACE_COLUMNS)}
        return ResultTable(label=label or os.path.basename(path),
                           fingerprint="", seed=0, columns=columns)


def build_mixing(cfg: ExperimentConfig) -> tp.MixingMatrix:
    if cfg.topology_kind == "ring":
        return tp.build_ring_mixing(cfg.n)
    if cfg.topology_kind == "complete":
        return tp.build_complete_mixing(cfg.n)
    return tp.load_mixing_csv(cfg.topology_path)


def build_oracle(cfg: ExperimentConfig, n: int) -> obj.GradientOracle:
    if cfg.objective_kind == "quadratic_pl":
        return obj.quadratic_pl_oracle(n=n, p=cfg.quad_dim, mu_min=cfg.quad_mu,
                                       L=cfg.quad_l, sigma=cfg.quad_sigma,
                                       rng_seed=cfg.quad_seed, center=cfg.quad_center)
    if cfg.data_source == "synthetic":
        data = obj.make_synthetic_classification(cfg.synthetic_samples,
                                                 cfg.synthetic_features,
                                                 cfg.synthetic_seed)
    else:
        fmt = cfg.data_format
        if fmt is None:
            fmt = "csv" if cfg.data_source.endswith(".csv") else "libsvm"
        loader = obj.load_csv if fmt == "csv" else obj.load_libsvm
        data = loader(cfg.data_source)
    shards = obj.partition_heterogeneous(data, n)
    if cfg.objective_kind == "logistic_l2":
        return obj.logistic_l2_oracle(shards, rho=cfg.rho, batch=cfg.batch)
    return obj.logistic_nonconvex_oracle(shards, omega=cfg.omega, batch=cfg.batch)


def resolve_hyperparams(cfg: ExperimentConfig, oracle: obj.GradientOracle,
                        mix: tp.MixingMatrix) -> lmt.HyperParams:
    """Turn a schedule tag into concrete round hyperparameters."""
    lca = tp.lca_params(mix.lam)
    beta = cfg.beta if cfg.beta is not None else lca.rho_w
    if cfg.schedule == "explicit":
        hp = lmt.HyperParams(Q=cfg.Q, eta_a=cfg.eta_a, eta_s=cfg.eta_s,
                             beta=beta, eta_w=lca.eta_w)
    elif cfg.schedule == "figure1":
        hp = lmt.HyperParams(Q=cfg.Q, eta_a=0.25 / cfg.Q, eta_s=0.1,
                             beta=beta, eta_w=lca.eta_w)
    elif cfg.schedule == "theorem1":
        if oracle.L is None:
            raise ConfigError("schedule: theorem1 needs an oracle with a "
                              "known smoothness constant")
        delta_f = cfg.delta_f
        if delta_f is None:
            if oracle.f_star is None:
                raise ConfigError("schedule.delta_f: required when the oracle "
                                  "does not expose its minimum")
            delta_f = oracle.global_value(np.zeros(oracle.dim)) - oracle.f_star
            if delta_f <= 0:
                delta_f = 1.0
        hp = lmt.theorem1_stepsizes(L=oracle.L, sigma=oracle.sigma, n=oracle.n_agents,
                                    Q=cfg.Q, T=cfg.T, delta_f=delta_f, beta=beta,
                                    eta_w=lca.eta_w)
    else:  # theorem2
        mu = oracle.mu if oracle.mu else cfg.quad_mu
        if not mu or mu <= 0:
            raise ConfigError("schedule: theorem2 needs a positive strong "
                              "convexity / PL modulus")
        hp = lmt.theorem2_stepsizes(mu=mu, Q=cfg.Q, T=cfg.T, lam=mix.lam)
    if cfg.method in ("lmt", "naive_lmt", "pdsgdm"):
        lmt.check_momentum(hp.beta, lca.rho_w)
    return hp


def _initial_iterates(cfg: ExperimentConfig, n: int, p: int,
                      streams: TrialStreams) -> np.ndarray:
    if cfg.init == "zeros":
        return np.zeros((n, p))
    X0 = np.empty((n, p))
    for i in range(n):
        X0[i] = cfg.init_scale * streams.init_state(i).normal(size=p)
    return X0


def _resolve_f_star(cfg: ExperimentConfig, oracle: obj.GradientOracle) -> float | None:
    if oracle.f_star is not None:
        return oracle.f_star
    if cfg.objective_kind == "logistic_l2" and cfg.rho > 0:
        oracle.f_star = dg.solve_f_star(oracle)
        return oracle.f_star
    return None


_MEAN_STD_METRICS = ("grad_norm_avg", "opt_gap_mean")
_MEAN_ONLY_METRICS = ("consensus_x", "consensus_y", "z_dev",
                      "lyapunov_surrogate", "d_bar_drift")


def _run_trial(cfg: ExperimentConfig, mix: tp.MixingMatrix, lca: tp.LcaParams,
               oracle: obj.GradientOracle, hp: lmt.HyperParams, trial: int,
               f_star: float | None) -> dict[str, np.ndarray]:
    streams = TrialStreams(cfg.seed, trial)
    X0 = _initial_iterates(cfg, oracle.n_agents, oracle.dim, streams)
    is_tracking = cfg.method in ("lmt", "naive_lmt")
    if is_tracking:
        state = lmt.init_state(X0)
        round_fn = lmt.lmt_round if cfg.method == "lmt" else lmt.naive_local_momentum_round
    else:
        spec = bl.BaselineSpec(method=cfg.method, hp=hp)
        state = bl.init_baseline_state(spec, X0)

    out = {name: np.full(cfg.T, np.nan) for name in
           _MEAN_STD_METRICS + _MEAN_ONLY_METRICS}
    out["t"] = np.arange(cfg.T, dtype=float)

    have_lyapunov = is_tracking and f_star is not None and oracle.L is not None
    x_bar_prev: np.ndarray | None = None
    d_prev: np.ndarray | None = None
    r_bar_prev: np.ndarray | None = None

    for t in range(cfg.T):
        X = state.X
        x_bar = X.mean(axis=0)
        out["consensus_x"][t] = dg.consensus_error(X)
        g_bar = oracle.global_gradient(x_bar)
        out["grad_norm_avg"][t] = float(g_bar @ g_bar)
        if f_star is not None:
            out["opt_gap_mean"][t] = float(np.mean(oracle.global_values_at_rows(X))) - f_star

        d_bar = None
        z_bar_sq = z_dev = None
        if is_tracking:
            grads_at_mean = oracle.full_gradients_at(x_bar)
            dev = state.Z - grads_at_mean
            z_dev = float(np.sum(dev * dev))
            out["z_dev"][t] = z_dev
            z_mean = state.Z.mean(axis=0)
            z_bar_sq = float(z_mean @ z_mean)
            d_bar = dg.d_bar_sequence(x_bar, x_bar_prev, hp.beta, t)
            if t == 0:
                out["d_bar_drift"][t] = 0.0
            else:
                resid = d_bar - (d_prev - hp.eta_hat * r_bar_prev)
                out["d_bar_drift"][t] = float(np.linalg.norm(resid))

        if is_tracking:
            state, outs = round_fn(state, oracle, mix, hp, streams)
            out["consensus_y"][t] = dg.consensus_error(outs.Y)
            r_bar_prev = outs.G_sum_avg.mean(axis=0)
            if have_lyapunov:
                out["lyapunov_surrogate"][t] = dg.lyapunov_surrogate(
                    f_dbar=oracle.global_value(d_bar), f_star=f_star,
                    z_bar_sq=z_bar_sq, consensus_x=out["consensus_x"][t],
                    consensus_y=out["consensus_y"][t], z_dev=z_dev,
                    hp=hp, L=oracle.L, lca=lca, n=oracle.n_agents)
        else:
            state = bl.baseline_round(spec, state, oracle, mix, streams)

        x_bar_prev = x_bar
        d_prev = d_bar
    return out


def run_experiment(cfg: ExperimentConfig,
                   label: str | None = None) -> ResultTable:
    """Run one experiment (all trials) and return the aggregated table.

    Writes ``trace.csv`` and ``meta.txt`` into ``cfg.outdir`` when set.
    """
    mix = build_mixing(cfg)
    lca = tp.lca_params(mix.lam)
    oracle = build_oracle(cfg, mix.n)
    hp = resolve_hyperparams(cfg, oracle, mix)
    f_star = _resolve_f_star(cfg, oracle)

    trials = [_run_trial(cfg, mix, lca, oracle, hp, trial, f_star)
              for trial in range(cfg.trials)]

    # mean and std of every metric are kept in memory; the trace CSV
    # schema carries std columns only for the two headline metrics
    columns: dict[str, np.ndarray] = {"t": trials[0]["t"].copy()}
    for name in _MEAN_STD_METRICS + _MEAN_ONLY_METRICS:
        stacked = np.stack([tr[name] for tr in trials])
        columns[name] = stacked.mean(axis=0)
        columns[name + "_std"] = stacked.std(axis=0)

    table = ResultTable(label=label or cfg.method, fingerprint=cfg.fingerprint(),
                        seed=cfg.seed, columns=columns)
    if cfg.outdir:
        os.makedirs(cfg.outdir, exist_ok=True)
        table.to_csv(os.path.join(cfg.outdir, "trace.csv"))
        _write_meta(cfg, mix, lca, hp, f_star,
                    os.path.join(cfg.outdir, "meta.txt"))
    return table


def _write_meta(cfg: ExperimentConfig, mix: tp.MixingMatrix, lca: tp.LcaParams,
                hp: lmt.HyperParams, f_star: float | None, path: str) -> None:
    lines = [
        f"fingerprint = {cfg.fingerprint()}",
        f"seed = {cfg.seed}",
        f"version = {_VERSION}",
        f"method = {cfg.method}",
        f"schedule = {cfg.schedule}",
        f"n = {mix.n}",
        f"lambda = {mix.lam!r}",
        f"spectral_gap = {mix.spectral_gap!r}",
        f"eta_w = {lca.eta_w!r}",
        f"rho_w = {lca.rho_w!r}",
        f"Q = {hp.Q}",
        f"eta_a = {hp.eta_a!r}",
        f"eta_s = {hp.eta_s!r}",
        f"eta_hat = {hp.eta_hat!r}",
        f"beta = {hp.beta!r}",
        f"T = {cfg.T}",
        f"trials = {cfg.trials}",
        f"f_star = {'unknown' if f_star is None else repr(f_star)}",
        "lyapunov_note = surrogate: realized consensus norms replace "
        "expectation-level bounds",
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


SWEEP_AXES = ("Q", "n", "method")


def run_sweep(cfg: ExperimentConfig, axis: str, values: list) -> tuple[list[ResultTable], dict]:
    """Rerun the experiment along one axis and summarize final windows.

    ``Q`` sweeps hold the composite step ``eta_hat`` fixed: stepsizes are
    resolved once on the base config, then the local step is rescaled as
    ``eta_a = eta_hat / (eta_s Q)`` per point.  ``n`` sweeps re-resolve
    everything per point (the graph changes); ``method`` sweeps share the
    resolved stepsizes through the parity map.  For ``Q`` sweeps the
    summary carries the log-log slope of the final-window gradient metric
    against ``Q``.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    if not values:
        raise ConfigError("sweep needs at least one axis value")

    tables: list[ResultTable] = []
    rows: list[dict] = []
    base_outdir = cfg.outdir

    base_hp: lmt.HyperParams | None = None
    if axis == "Q":
        mix = build_mixing(cfg)
        oracle = build_oracle(cfg, mix.n)
        base_hp = resolve_hyperparams(cfg, oracle, mix)

    for value in values:
        if axis == "Q":
            q = int(value)
            point = replace(cfg, schedule="explicit", Q=q,
                            eta_a=base_hp.eta_hat / (base_hp.eta_s * q),
                            eta_s=base_hp.eta_s, beta=base_hp.beta)
            label = f"Q={q}"
        elif axis == "n":
            point = replace(cfg, n=int(value))
            label = f"n={int(value)}"
        else:
            point = replace(cfg, method=str(value))
            label = str(value)
        if base_outdir:
            point = replace(point, outdir=os.path.join(
                base_outdir, f"point_{axis}_{label.replace('=', '')}"))
        table = run_experiment(point, label=label)
        tables.append(table)
        rows.append({
            "axis": axis,
            "value": value,
            "final_grad_norm_avg": table.final_window("grad_norm_avg"),
            "final_opt_gap_mean": table.final_window("opt_gap_mean"),
            "final_consensus_x": table.final_window("consensus_x"),
        })

    summary: dict = {"axis": axis, "rows": rows}
    if axis == "Q":
        qs = np.array([float(r["value"]) for r in rows])
        finals = np.array([r["final_grad_norm_avg"] for r in rows])
        if len(qs) >= 2 and np.all(finals > 0):
            slope = float(np.polyfit(np.log(qs), np.log(finals), 1)[0])
            summary["loglog_slope_grad_norm_avg"] = slope

    if base_outdir:
        os.makedirs(base_outdir, exist_ok=True)
        _write_summary_csv(summary, os.path.join(base_outdir, "summary.csv"))
    return tables, summary


def _write_summary_csv(summary: dict, path: str) -> None:
    with open(path, "w", encoding="ascii") as fh:
        if "loglog_slope_grad_norm_avg" in summary:
            fh.write(f"# loglog_slope_grad_norm_avg = "
                     f"{summary['loglog_slope_grad_norm_avg']:.6f}\n")
        fh.write("axis,value,final_grad_norm_avg,final_opt_gap_mean,"
                 "final_consensus_x\n")
        for row in summary["rows"]:
            fh.write(f"{row['axis']},{row['value']},"
                     f"{format(row['final_grad_norm_avg'], '.17g')},"
                     f"{format(row['final_opt_gap_mean'], '.17g')},"
                     f"{format(row['final_consensus_x'], '.17g')}\n")
