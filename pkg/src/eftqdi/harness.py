"""Build runtime objects from a config, validate the modelling assumptions,
run seeded Monte Carlo experiments and write their outputs."""

from __future__ import annotations

import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng as rngmod
from .analysis import (
    GainCertificate,
    LyapunovTrace,
    RateFit,
    TheoryConstants,
    fold_mean,
    gain_certificate,
    gamma_threshold,
    gamma_threshold_rate,
    rate_fit,
)
from .config import ExperimentConfig, dump_config
from .encoding import LinearEncoder, verify_pe
from .engine import BatchResult, Plan, run_batch
from .errors import ConfigInvalid, NonPositiveInput, NonPositiveTrace
from .estimator import GainConfig, NetworkState, NodeState, ProjectionBox, StepSchedule
from .graphs import Digraph, EnsembleReport, MarkovSwitcher, TopologyEnsemble, validate_ensemble
from .signals import (
    BinarySensor,
    ExcitationReport,
    GaussianNoise,
    QuantizedChannel,
    StateSpaceRegressor,
    density_bounds,
    excitation_report,
)

log = logging.getLogger(__name__)

THREADS_ENV = "EFTQDI_THREADS"


# -- builders ---------------------------------------------------------------------


def build_ensemble(cfg: ExperimentConfig) -> TopologyEnsemble:
    graphs = [Digraph.from_edges(cfg.nodes, [tuple(int(v) if k < 2 else v for k, v in enumerate(e)) for e in g.edges], g.weight) for g in cfg.ensemble.graphs]
    s = len(graphs)
    init = cfg.ensemble.initial if cfg.ensemble.initial is not None else [1.0 / s] * s
    return TopologyEnsemble(tuple(graphs), np.array(cfg.ensemble.transition), np.array(init))


def build_box(cfg: ExperimentConfig) -> ProjectionBox:
    return ProjectionBox(np.array(cfg.box.lower), np.array(cfg.box.upper))


def build_encoder(cfg: ExperimentConfig) -> LinearEncoder:
    sched = cfg.encoder.schedule
    vectors = None if sched == "cyclic-basis" else tuple(tuple(v) for v in sched)
    return LinearEncoder(cfg.dimension, vectors, cfg.encoder.h_psi)


def build_gains(cfg: ExperimentConfig) -> GainConfig:
    return GainConfig(cfg.gains.beta, cfg.gains.gamma, StepSchedule(cfg.gains.p, cfg.excitation_window))


def initial_values(cfg: ExperimentConfig, box: ProjectionBox) -> tuple[np.ndarray, np.ndarray]:
    # projected once so every stored estimate lies in the box from the start
    th = box.center if cfg.initial.theta is None else np.array(cfg.initial.theta, dtype=float)
    en = box.center if cfg.initial.ene is None else np.array(cfg.initial.ene, dtype=float)
    return box.project(th), box.project(en)


def build_plan(cfg: ExperimentConfig) -> Plan:
    ens = build_ensemble(cfg)
    box = build_box(cfg)
    th0, en0 = initial_values(cfg, box)
    edges = tuple(ens.union_edges())
    regs = cfg.regressors
    return Plan(
        ensemble=ens,
        encoder=build_encoder(cfg),
        box=box,
        gains=build_gains(cfg),
        theta_true=np.array(cfg.theta, dtype=float),
        reg_A=np.array([r.A for r in regs], dtype=float),
        reg_B=np.array([r.B for r in regs], dtype=float),
        reg_C=np.array([r.C for r in regs], dtype=float),
        reg_x0=np.array([r.x0 for r in regs], dtype=float),
        halfwidth=np.array([r.halfwidth for r in regs], dtype=float),
        sensor_C=cfg.sensor_threshold_vector(),
        meas_std=cfg.noise.measurement_std,
        channel_C=np.array([cfg.channel_threshold_for(i, j) for i, j in edges], dtype=float),
        channel_std=cfg.noise.channel_std,
        theta0=th0,
        ene0=en0,
        edges=edges,
    )


def build_network(cfg: ExperimentConfig, rep: int = 0, seed: int | None = None) -> NetworkState:
    """Per-node state for one repetition, on the same streams the batch engine uses."""
    seed = cfg.seed if seed is None else seed
    ens = build_ensemble(cfg)
    box = build_box(cfg)
    th0, en0 = initial_values(cfg, box)
    edges = ens.union_edges()
    nodes = []
    for i in range(cfg.nodes):
        nbrs = {j: en0.copy() for r, j in edges if r == i}
        nodes.append(NodeState(theta=th0.copy(), neighbor_estimates=nbrs))
    meas = GaussianNoise(cfg.noise.measurement_std)
    chan = GaussianNoise(cfg.noise.channel_std)
    regs = [
        StateSpaceRegressor(r.A, r.B, r.C, r.x0, r.halfwidth, phi_bar=cfg.phi_bar)
        for r in cfg.regressors
    ]
    return NetworkState(
        nodes=nodes,
        theta_true=np.array(cfg.theta, dtype=float),
        ensemble=ens,
        switcher=MarkovSwitcher(ens, rngmod.stream(seed, rep, rngmod.SWITCH)),
        encoder=build_encoder(cfg),
        box=box,
        regressors=regs,
        sensors=[BinarySensor(float(c), meas) for c in cfg.sensor_threshold_vector()],
        channels=[QuantizedChannel(cfg.channel_threshold_for(i, j), chan) for i, j in edges],
        regressor_rngs=[rngmod.stream(seed, rep, rngmod.REGRESSOR, i) for i in range(cfg.nodes)],
        measurement_rngs=[rngmod.stream(seed, rep, rngmod.MEASUREMENT, i) for i in range(cfg.nodes)],
        channel_rngs=[rngmod.stream(seed, rep, rngmod.CHANNEL, e) for e in range(len(edges))],
        edges=list(edges),
    )


def regressor_streams(cfg: ExperimentConfig, steps: int, rep: int = 0, seed: int | None = None) -> np.ndarray:
    """Realized regressors of every node, shape (m, steps, n)."""
    seed = cfg.seed if seed is None else seed
    out = np.empty((cfg.nodes, steps, cfg.dimension))
    for i, r in enumerate(cfg.regressors):
        gen = StateSpaceRegressor(r.A, r.B, r.C, r.x0, r.halfwidth)
        etas = rngmod.stream(seed, rep, rngmod.REGRESSOR, i).uniform(-r.halfwidth, r.halfwidth, steps)
        for k in range(steps):
            out[i, k] = gen.advance(etas[k])
    return out


# -- validation ---------------------------------------------------------------------


@dataclass
class ValidationReport:
    ensemble: EnsembleReport
    theta_in_box: bool
    excitation: ExcitationReport
    realized_phi_max: float
    delta_psi_sq: float
    psi_bar: float
    constants: TheoryConstants | None
    certificate: GainCertificate | None
    gamma_threshold: float
    gamma_threshold_rate: float
    failures: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def lines(self) -> list[tuple[str, object]]:
        e = self.ensemble
        out = [
            ("assumption_1.ergodic", e.ergodic),
            ("assumption_1.balanced_all", e.balanced_all),
            ("assumption_1.union_has_spanning_tree", e.union_has_spanning_tree),
            ("assumption_1.stationary", list(e.stationary)),
            ("assumption_2.h", self.excitation.h),
            ("assumption_2.delta_phi_sq", self.excitation.delta_phi_sq),
            ("assumption_2.satisfied", self.excitation.satisfied),
            ("assumption_2.mode", "realized sample path (surrogate for the conditional expectation)"),
            ("assumption_2.realized_phi_max", self.realized_phi_max),
            ("assumption_3.theta_in_box", self.theta_in_box),
            ("assumption_4.noise", "i.i.d. Gaussian, CDF known exactly"),
            ("assumption_5.step_size", "k^-p with p in (1/2, 1]"),
            ("encoder.delta_psi_sq", self.delta_psi_sq),
            ("encoder.psi_bar", self.psi_bar),
        ]
        if self.constants is not None:
            for k, v in self.constants.as_dict().items():
                out.append((f"constants.{k}", v))
        if self.certificate is not None:
            c = self.certificate
            out += [
                ("certificate.w1", c.w1),
                ("certificate.w2", c.w2),
                ("certificate.w3", c.w3),
                ("certificate.lambda_min_W", c.lambda_min_W),
                ("certificate.mean_square_convergence", c.certifies_convergence),
                ("certificate.step_order_rate", c.certifies_rate),
                ("certificate.gamma_threshold", self.gamma_threshold),
                ("certificate.gamma_threshold_rate", self.gamma_threshold_rate),
            ]
        for note in self.notes:
            out.append(("note", note))
        for f in self.failures:
            out.append(("FAILED", f))
        return out


def theory_constants(
    cfg: ExperimentConfig, ens_report: EnsembleReport, excitation: ExcitationReport, encoder: LinearEncoder, delta_psi_sq: float
) -> TheoryConstants:
    box = build_box(cfg)
    theta_bar = box.theta_bar
    meas = GaussianNoise(cfg.noise.measurement_std)
    chan = GaussianNoise(cfg.noise.channel_std)
    f_bounds = [density_bounds(meas, float(c), cfg.phi_bar * theta_bar) for c in cfg.sensor_threshold_vector()]
    edges = build_ensemble(cfg).union_edges()
    g_lows = [density_bounds(chan, cfg.channel_threshold_for(i, j), encoder.psi_bar * theta_bar)[0] for i, j in edges]
    return TheoryConstants(
        h=cfg.excitation_window,
        c_h=StepSchedule(cfg.gains.p, cfg.excitation_window).c_h,
        f_lower=min(lo for lo, _ in f_bounds),
        f_upper=max(hi for _, hi in f_bounds),
        g_lower=min(g_lows) if g_lows else 0.0,
        phi_bar=cfg.phi_bar,
        psi_bar=encoder.psi_bar,
        theta_bar=theta_bar,
        delta_phi_sq=excitation.delta_phi_sq,
        delta_psi_sq=delta_psi_sq,
        pi_min=ens_report.pi_min,
        lambda2_mirror=ens_report.lambda2_mirror,
        lambda_m=ens_report.lambda_m,
        n_bar=ens_report.n_bar,
    )


def validate(cfg: ExperimentConfig) -> ValidationReport:
    ens = build_ensemble(cfg)
    box = build_box(cfg)
    encoder = build_encoder(cfg)
    ens_report = validate_ensemble(ens)
    failures = [f"Assumption 1 (topology): {p}" for p in ens_report.problems]

    theta_ok = box.contains(cfg.theta)
    if not theta_ok:
        failures.append("Assumption 3 (prior box): true parameter lies outside the box")

    h = cfg.excitation_window
    streams = regressor_streams(cfg, cfg.excitation_horizon + h - 1)
    exc = excitation_report(streams, h)
    if not exc.satisfied:
        failures.append(f"Assumption 2 (cooperative excitation): delta_phi_sq = {exc.delta_phi_sq:.3e} with h = {h}")
    realized = float(np.sqrt((streams**2).sum(axis=-1)).max())
    notes = []
    if realized > cfg.phi_bar:
        notes.append(f"realized regressor norm {realized:.6g} exceeds phi_bar {cfg.phi_bar:.6g}")

    dpsi = verify_pe(encoder)
    if not dpsi > 0:
        failures.append(f"encoder persistent excitation fails with h_psi = {encoder.h_psi}")

    constants = cert = None
    g_thr = g_rate = math.nan
    if not failures:
        constants = theory_constants(cfg, ens_report, exc, encoder, dpsi)
        try:
            cert = gain_certificate(cfg.gains.beta, cfg.gains.gamma, constants)
            g_thr = gamma_threshold(cfg.gains.beta, constants)
            g_rate = gamma_threshold_rate(cfg.gains.beta, constants) if cfg.gains.p == 1.0 else g_thr
        except NonPositiveInput as exc_:
            notes.append(f"theory constants degenerate: {exc_}")
    return ValidationReport(
        ensemble=ens_report,
        theta_in_box=theta_ok,
        excitation=exc,
        realized_phi_max=realized,
        delta_psi_sq=dpsi,
        psi_bar=encoder.psi_bar,
        constants=constants,
        certificate=cert,
        gamma_threshold=g_thr,
        gamma_threshold_rate=g_rate,
        failures=failures,
        notes=notes,
    )


# -- experiments ----------------------------------------------------------------------


@dataclass
class ExperimentResult:
    mse_fe: np.ndarray
    mse_ene: np.ndarray
    baseline_mse: np.ndarray | None
    fits: dict[str, RateFit]
    validation: ValidationReport
    config: ExperimentConfig
    seed: int
    reps: int
    phi_max: float

    @property
    def horizon(self) -> int:
        return len(self.mse_fe)

    @property
    def traces(self) -> LyapunovTrace:
        return LyapunovTrace(U=self.mse_ene, V=self.mse_fe, rep_count=self.reps)


def worker_count(reps: int, override: int | None = None) -> int:
    if override is not None:
        n = override
    else:
        env = os.environ.get(THREADS_ENV)
        n = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(n, reps))


def _split(reps: int, parts: int) -> list[list[int]]:
    bounds = np.linspace(0, reps, parts + 1).round().astype(int)
    return [list(range(bounds[i], bounds[i + 1])) for i in range(parts) if bounds[i + 1] > bounds[i]]


def simulate(plan: Plan, seed: int, reps: int, horizon: int, baseline: bool, workers: int = 1) -> list[BatchResult]:
    batches = _split(reps, workers)
    if len(batches) == 1:
        return [run_batch(plan, seed, batches[0], horizon, baseline)]
    with ProcessPoolExecutor(max_workers=len(batches)) as pool:
        futures = [pool.submit(run_batch, plan, seed, b, horizon, baseline) for b in batches]
        return [f.result() for f in futures]


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    report = validate(cfg)
    if not report.ok:
        raise ConfigInvalid("; ".join(report.failures), report.failures)
    plan = build_plan(cfg)
    nw = worker_count(cfg.reps, workers)
    batches = simulate(plan, cfg.seed, cfg.reps, cfg.horizon, cfg.baseline, nw)

    # fold strictly in rep order so aggregates never depend on batching
    def rows(attr):
        for b in batches:
            arr = getattr(b, attr)
            for r in range(arr.shape[0]):
                yield arr[r]

    V = fold_mean(rows("V"))
    U = fold_mean(rows("U"))
    Vb = fold_mean(rows("V_baseline")) if cfg.baseline else None
    phi_max = float(max(b.phi_max.max() for b in batches))
    if phi_max > cfg.phi_bar:
        warnings.warn(
            f"realized regressor norm {phi_max:.6g} exceeded configured phi_bar {cfg.phi_bar:.6g}",
            RuntimeWarning,
            stacklevel=2,
        )

    fits = {}
    lo, hi = cfg.effective_rate_window()
    if hi > lo:
        for name, trace in (("mse_fe", V), ("mse_ene", U), ("mse_fe_baseline", Vb)):
            if trace is None:
                continue
            try:
                fits[name] = rate_fit(trace, lo, hi)
            except NonPositiveTrace:
                log.warning("trace %s not positive on [%d, %d]; no fit", name, lo, hi)
    return ExperimentResult(
        mse_fe=V,
        mse_ene=U,
        baseline_mse=Vb,
        fits=fits,
        validation=report,
        config=cfg,
        seed=cfg.seed,
        reps=cfg.reps,
        phi_max=phi_max,
    )


# -- output -----------------------------------------------------------------------------


def format_float(x: float) -> str:
    """Shortest round-trip decimal; integral values lose the trailing '.0'."""
    r = repr(float(x))
    return r[:-2] if r.endswith(".0") else r


def csv_text(res: ExperimentResult) -> str:
    cols = [res.mse_fe, res.mse_ene]
    header = "k,mse_fe,mse_ene"
    if res.baseline_mse is not None:
        cols.append(res.baseline_mse)
        header += ",mse_fe_baseline"
    lines = [header]
    for k, vals in enumerate(zip(*cols), start=1):
        lines.append(",".join([str(k)] + [format_float(v) for v in vals]))
    return "\n".join(lines) + "\n"


def emit_csv(res: ExperimentResult, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(csv_text(res))
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
    arr = np.array(data)
    return {name: arr[:, c] for c, name in enumerate(header)}


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(format_value(x) for x in v) + "]"
    return str(v)


def report_text(res: ExperimentResult) -> str:
    lines = [
        ("seed", res.seed),
        ("reps", res.reps),
        ("horizon", res.horizon),
        ("phi_bar.configured", res.config.phi_bar),
        ("phi_bar.realized_max", res.phi_max),
        ("phi_bar.exceeded", res.phi_max > res.config.phi_bar),
    ]
    lines += res.validation.lines()
    for name, fit in res.fits.items():
        lines += [
            (f"fit.{name}.slope", fit.slope),
            (f"fit.{name}.intercept", fit.intercept),
            (f"fit.{name}.r_squared", fit.r_squared),
            (f"fit.{name}.window", list(fit.window)),
        ]
    lines += [("final.mse_fe", res.mse_fe[-1]), ("final.mse_ene", res.mse_ene[-1])]
    if res.baseline_mse is not None:
        lines.append(("final.mse_fe_baseline", res.baseline_mse[-1]))
        lines.append(("final.baseline_over_cooperative", res.baseline_mse[-1] / res.mse_fe[-1]))
    return "".join(f"{k} = {format_value(v)}\n" for k, v in lines)


def write_outputs(res: ExperimentResult, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / "mse.csv", "report": out / "report.txt", "config": out / "config.json"}
    emit_csv(res, paths["csv"])
    paths["report"].write_text(report_text(res), encoding="utf-8")
    paths["config"].write_text(dump_config(res.config) + "\n", encoding="utf-8")
    return paths
