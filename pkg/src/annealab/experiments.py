"""Experiment orchestration: configs, dispatch, the lemma suite, persistence.

Every experiment is driven by one declarative JSON config (flags on the CLI
override individual fields).  Results carry one metric row per grid point per
metric with its confidence interval, overlay value, and seed lineage, plus
pass/fail verdicts for assertion-style experiments.  Grid points are computed
independently and cached as per-point JSON files keyed by a config hash, so
interrupted runs resume; identical config and master seed reproduce
byte-identical CSV outputs on one platform.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import bounds as bd
from . import rademacher as rd
from .dynamics import (NoiseStream, flow_divergence_probability, run_coupled,
                       run_sde)
from .errors import UsageError
from .losses import LossModel, builtin_models, verify_regularity
from .reference import empirical_min, empirical_min_multistart
from .schedules import Schedule
from .statutils import bootstrap_mean_ci, loglog_slope

EXPERIMENTS = ("gen-gap", "sa-convergence", "sa-discretization",
               "lemma-suite", "bounds-report", "rademacher-study")

SCHEMA_VERSION = 1


@dataclass
class ExperimentConfig:
    experiment: str
    master_seed: int = 0
    output_dir: str = "results"
    model: dict = field(default_factory=lambda: {"family": "ripple", "dim": 1})
    schedule: dict = field(default_factory=lambda: {"mode": "iterated-log",
                                                    "gamma0": 1.0})
    n_values: list = field(default_factory=lambda: [16, 64, 256])
    s_values: list = field(default_factory=lambda: [100.0, 1000.0])
    t_values: list = field(default_factory=lambda: [10.0])
    h_values: list = field(default_factory=lambda: [1e-2, 5e-3])
    replicas: int = 256
    draws: int = 16
    sample_size: int = 32
    beta: float | None = 5.0
    x0: list = field(default_factory=lambda: [0.0])
    params: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise UsageError(f"unknown experiment {self.experiment!r}")
        for name in ("n_values", "s_values", "t_values", "h_values"):
            grid = getattr(self, name)
            if not grid:
                raise UsageError(f"{name} must be non-empty")
            if sorted(grid) != list(grid) and sorted(grid, reverse=True) != list(grid):
                raise UsageError(f"{name} must be sorted")
        if self.replicas < 1 or self.sample_size < 1:
            raise UsageError("replicas and sample_size must be >= 1")

    def build_model(self) -> LossModel:
        return LossModel.from_dict(self.model)

    def build_schedule(self) -> Schedule:
        return Schedule(**self.schedule)

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        version = d.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise UsageError(f"unsupported config schema version {version}")
        return ExperimentConfig(**d)

    def content_hash(self) -> str:
        payload = self.to_dict()
        payload.pop("output_dir", None)
        text = json.dumps(payload, sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class MetricRow:
    experiment: str
    metric: str
    x: float
    value: float
    ci_lo: float | None = None
    ci_hi: float | None = None
    overlay: float | None = None
    seed_path: str = ""


@dataclass
class Verdict:
    check: str
    passed: bool
    margin: float
    detail: str = ""


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list
    verdicts: list
    wall_clock: float = 0.0
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "config": self.config.to_dict(),
            "rows": [asdict(r) for r in self.rows],
            "verdicts": [asdict(v) for v in self.verdicts],
            "wall_clock": self.wall_clock,
        }

    @staticmethod
    def from_dict(d: dict) -> "ExperimentResult":
        return ExperimentResult(
            config=ExperimentConfig.from_dict(d["config"]),
            rows=[MetricRow(**r) for r in d["rows"]],
            verdicts=[Verdict(**v) for v in d["verdicts"]],
            wall_clock=d.get("wall_clock", 0.0),
            schema_version=d.get("schema_version", SCHEMA_VERSION),
        )

    def all_passed(self) -> bool:
        return all(v.passed for v in self.verdicts)


def derive_seed(master: int, *path: str) -> int:
    """Stable 63-bit seed from the master seed and a readable path."""
    text = f"{master}/" + "/".join(path)
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def seed_path(master: int, *path: str) -> str:
    return f"master:{master}/" + "/".join(path)


class PointCache:
    """Per-grid-point JSON cache making partial runs resumable."""

    def __init__(self, config: ExperimentConfig, enabled: bool = True):
        self.enabled = enabled
        self.dir = os.path.join(config.output_dir, "partial")
        self.prefix = f"{config.experiment}-{config.content_hash()}"
        if enabled:
            os.makedirs(self.dir, exist_ok=True)

    def _path(self, key: str) -> str:
        return os.path.join(self.dir, f"{self.prefix}-{key}.json")

    def get(self, key: str) -> dict | None:
        if not self.enabled:
            return None
        path = self._path(key)
        if os.path.exists(path):
            with open(path) as fh:
                return json.load(fh)
        return None

    def put(self, key: str, payload: dict) -> None:
        if not self.enabled:
            return
        with open(self._path(key), "w") as fh:
            json.dump(payload, fh, sort_keys=True)


# -- experiment implementations -----------------------------------------------


def _ci_ordered_nonincreasing(values, halfwidths) -> tuple[bool, float]:
    """Non-increasing within CI slack; margin is the worst slack left."""
    worst = math.inf
    for i in range(len(values) - 1):
        slack = values[i] + halfwidths[i] + halfwidths[i + 1] - values[i + 1]
        worst = min(worst, slack)
    return worst >= 0.0, worst


def _run_bounds_report(config: ExperimentConfig) -> ExperimentResult:
    model = config.build_model()
    sched = config.build_schedule()
    c = model.constants
    rows: list[MetricRow] = []
    sseed = derive_seed(config.master_seed, "bounds-report", "sample")
    sample = model.draw_sample(config.sample_size, seed=sseed)
    spath = seed_path(config.master_seed, "bounds-report", "sample")

    lam, C2 = bd.lyapunov_constants(c.m, c.b, model.dim, sched.gamma0, 2.0)
    for name, value in (("lambda2", lam), ("C2", C2)):
        rows.append(MetricRow(config.experiment, name, 0.0, value))

    delta = float(config.params.get("delta", 1.0))
    thresholds = bd.level_thresholds(model, sample, delta)
    if model.dim <= 2:
        inf_f = empirical_min(model, sample).value
    else:
        inf_f = empirical_min_multistart(
            model, sample, seed=derive_seed(config.master_seed, "inf")).value
    r1 = bd.r1_threshold(model, sample, thresholds.r0_tilde, delta, inf_f=inf_f)
    eps = bd.epsilon_of(model, sample, r1, inf_f=inf_f)
    for name, value in (("r0_tilde", thresholds.r0_tilde),
                        ("beta_threshold", thresholds.beta_threshold),
                        ("r1_tilde", r1), ("epsilon", eps),
                        ("inf_empirical_loss", inf_f)):
        rows.append(MetricRow(config.experiment, name, delta, value,
                              seed_path=spath))

    for t in config.t_values:
        gamma_t = sched.gamma(t)
        rep = bd.coupling_constants(c.m, c.b, c.M, model.dim, sched.gamma0,
                                    gamma_t)
        for name in ("R1", "R2", "kappa", "Q", "zeta", "xi", "c_t"):
            rows.append(MetricRow(config.experiment, name, float(t),
                                  float(getattr(rep, name))))
    return ExperimentResult(config=config, rows=rows, verdicts=[])


def _run_gen_gap(config: ExperimentConfig, resume: bool) -> ExperimentResult:
    model = config.build_model()
    t = float(config.t_values[-1])
    if config.beta is None:
        raise UsageError("gen-gap needs beta")
    h = float(config.params.get("h", 5e-3))
    cache = PointCache(config, enabled=resume)
    rows: list[MetricRow] = []
    abs_gaps, abs_hws, overlays = [], [], []
    for n in config.n_values:
        key = f"n{n}"
        payload = cache.get(key)
        if payload is None:
            pts = rd.gen_gap_estimate(
                model, [n], draws=config.draws, replicas=config.replicas,
                t=t, beta=config.beta, x0=config.x0,
                master_seed=derive_seed(config.master_seed, "gen-gap", str(n)),
                h=h)
            p = pts[0]
            payload = {k: getattr(p, k) for k in
                       ("n", "gap", "ci_lo", "ci_hi", "gap_abs", "abs_ci_lo",
                        "abs_ci_hi", "overlay")}
            cache.put(key, payload)
        spath = seed_path(config.master_seed, "gen-gap", f"n={n}")
        rows.append(MetricRow(config.experiment, "gap-signed", float(n),
                              payload["gap"], payload["ci_lo"],
                              payload["ci_hi"], payload["overlay"], spath))
        rows.append(MetricRow(config.experiment, "gap-abs", float(n),
                              payload["gap_abs"], payload["abs_ci_lo"],
                              payload["abs_ci_hi"], payload["overlay"], spath))
        abs_gaps.append(payload["gap_abs"])
        abs_hws.append(0.5 * (payload["abs_ci_hi"] - payload["abs_ci_lo"]))
        overlays.append(payload["overlay"])

    verdicts: list[Verdict] = []
    band = config.params.get("slope_band", [-0.65, -0.35])
    if all(g > 0 for g in abs_gaps):
        slope = loglog_slope(np.asarray(config.n_values, float),
                             np.asarray(abs_gaps))
        ok = band[0] <= slope <= band[1]
        margin = min(slope - band[0], band[1] - slope)
        verdicts.append(Verdict("gen-gap-slope", ok, margin,
                                f"slope={slope:.4f} band={band}"))
        ratios = np.asarray(abs_gaps) / np.asarray(overlays)
        spread = float(ratios.max() / ratios.min())
        verdicts.append(Verdict("gen-gap-envelope-ratio", spread < 3.0,
                                3.0 - spread, f"max/min ratio={spread:.3f}"))
    else:
        verdicts.append(Verdict("gen-gap-slope", False, -math.inf,
                                "non-positive gap estimate"))
    return ExperimentResult(config=config, rows=rows, verdicts=verdicts)


def _sa_excess_point(config: ExperimentConfig, model, sched, sample, inf_f,
                     s: float, h: float) -> dict:
    t_eval = sched.alpha(s, s ** (2.0 / 3.0))
    nseed = derive_seed(config.master_seed, "sa-convergence", f"s{s}")
    noise = NoiseStream(seed=nseed, h=h)
    ens = run_sde(model, sample, "sa-continuous", config.x0,
                  record_times=[t_eval], noise=noise, schedule=sched,
                  h=h, replicas=config.replicas)
    vals = model.empirical_loss(ens.states[:, -1, :], sample) - inf_f
    lo, hi = bootstrap_mean_ci(vals, seed=nseed % (1 << 32))
    return {"s": s, "t_eval": t_eval, "excess": float(vals.mean()),
            "ci_lo": lo, "ci_hi": hi}


def _run_sa_convergence(config: ExperimentConfig, resume: bool) -> ExperimentResult:
    model = config.build_model()
    sched = config.build_schedule()
    h = float(config.params.get("h", 1e-2))
    sseed = derive_seed(config.master_seed, "sa-convergence", "sample")
    sample = model.draw_sample(config.sample_size, seed=sseed)
    inf_f = empirical_min(model, sample).value
    cache = PointCache(config, enabled=resume)

    rows: list[MetricRow] = []
    points = []
    for s in config.s_values:
        key = f"s{s}"
        payload = cache.get(key)
        if payload is None:
            payload = _sa_excess_point(config, model, sched, sample, inf_f,
                                       float(s), h)
            cache.put(key, payload)
        points.append(payload)
        x0n = float(np.linalg.norm(config.x0))
        try:
            overlay = (1.0 + x0n**4) / abs(bd.iterated_log(float(s), 4))
        except UsageError:
            overlay = None  # iterated log undefined below e^e
        rows.append(MetricRow(
            config.experiment, "sa-excess-loss", float(s), payload["excess"],
            payload["ci_lo"], payload["ci_hi"], overlay,
            seed_path(config.master_seed, "sa-convergence", f"s={s}")))

    # fixed-temperature comparison at the matched horizon of the largest s
    key = "sgld-reference"
    payload = cache.get(key)
    if payload is None:
        beta_ref = sched.gamma(float(config.s_values[0]))
        horizon = points[-1]["t_eval"]
        nseed = derive_seed(config.master_seed, "sa-convergence", "sgld-ref")
        ens = run_sde(model, sample, "sgld-continuous", config.x0,
                      record_times=[horizon], noise=NoiseStream(seed=nseed, h=h),
                      beta=beta_ref, h=h, replicas=config.replicas)
        vals = model.empirical_loss(ens.states[:, -1, :], sample) - inf_f
        lo, hi = bootstrap_mean_ci(vals, seed=nseed % (1 << 32))
        payload = {"excess": float(vals.mean()), "ci_lo": lo, "ci_hi": hi,
                   "beta": beta_ref, "horizon": horizon}
        cache.put(key, payload)
    rows.append(MetricRow(
        config.experiment, "sgld-fixed-beta-excess",
        float(config.s_values[0]), payload["excess"], payload["ci_lo"],
        payload["ci_hi"], None,
        seed_path(config.master_seed, "sa-convergence", "sgld-ref")))

    excesses = [p["excess"] for p in points]
    hws = [0.5 * (p["ci_hi"] - p["ci_lo"]) for p in points]
    ok, margin = _ci_ordered_nonincreasing(excesses, hws)
    verdicts = [Verdict("sa-monotone-improvement", ok, margin,
                        f"excess={['%.4f' % e for e in excesses]}")]
    slack = (payload["excess"] + 0.5 * (payload["ci_hi"] - payload["ci_lo"])
             + hws[-1] - excesses[-1])
    verdicts.append(Verdict(
        "sa-beats-fixed-beta", slack >= 0.0, slack,
        f"sa={excesses[-1]:.4f} sgld={payload['excess']:.4f}"))
    return ExperimentResult(config=config, rows=rows, verdicts=verdicts)


def _run_sa_discretization(config: ExperimentConfig, resume: bool) -> ExperimentResult:
    model = config.build_model()
    sched = config.build_schedule()
    c = model.constants
    h_values = sorted((float(h) for h in config.h_values), reverse=True)
    h_fine = h_values[-1]
    for h in h_values:
        ratio = h / h_fine
        if abs(ratio - round(ratio)) > 1e-9:
            raise UsageError("every h must be an integer multiple of the finest")
    record = [float(t) for t in config.t_values]
    t_end = record[-1]
    sseed = derive_seed(config.master_seed, "sa-discretization", "sample")
    sample = model.draw_sample(config.sample_size, seed=sseed)
    nseed = derive_seed(config.master_seed, "sa-discretization", "noise")
    cache = PointCache(config, enabled=resume)

    reports = {t: bd.coupling_constants(c.m, c.b, c.M, model.dim,
                                        sched.gamma0, sched.gamma(t))
               for t in record}
    rows: list[MetricRow] = []
    final_dist, final_rho = [], []
    for h in h_values:
        key = f"h{h}"
        payload = cache.get(key)
        if payload is None:
            noise = NoiseStream(seed=nseed, h=h_fine)
            run = run_coupled(model, sample, ("sa-continuous", "sa-discrete"),
                              config.x0, record_times=record, noise=noise,
                              schedule=sched, h=h, replicas=config.replicas,
                              ci_seed=nseed % (1 << 31))
            payload = {"times": [float(t) for t in run.times],
                       "dist": [float(v) for v in run.mean_distance],
                       "dist_ci": run.distance_ci.tolist(),
                       "rho2": [], "rho2_ci": []}
            for j, t in enumerate(record):
                vals = reports[t].rho2(run.first.states[:, j, :],
                                       run.second.states[:, j, :])
                vals = np.atleast_1d(vals)
                lo, hi = bootstrap_mean_ci(vals, seed=(nseed + j) % (1 << 31))
                payload["rho2"].append(float(vals.mean()))
                payload["rho2_ci"].append([lo, hi])
            cache.put(key, payload)
        spath = seed_path(config.master_seed, "sa-discretization", f"h={h}")
        for j, t in enumerate(payload["times"]):
            rows.append(MetricRow(config.experiment, f"coupling-distance@t={t:g}",
                                  h, payload["dist"][j],
                                  payload["dist_ci"][j][0],
                                  payload["dist_ci"][j][1], None, spath))
            rows.append(MetricRow(config.experiment, f"coupling-rho2@t={t:g}",
                                  h, payload["rho2"][j],
                                  payload["rho2_ci"][j][0],
                                  payload["rho2_ci"][j][1], None, spath))
        final_dist.append((payload["dist"][-1],
                           0.5 * (payload["dist_ci"][-1][1]
                                  - payload["dist_ci"][-1][0])))
        final_rho.append((payload["rho2"][-1],
                          0.5 * (payload["rho2_ci"][-1][1]
                                 - payload["rho2_ci"][-1][0])))

    verdicts = []
    for name, series in (("distance", final_dist), ("rho2", final_rho)):
        ok, margin = _ci_ordered_nonincreasing([v for v, _ in series],
                                               [w for _, w in series])
        verdicts.append(Verdict(
            f"discretization-{name}-decreasing", ok, margin,
            f"t={t_end:g} values={['%.5f' % v for v, _ in series]} "
            f"h={h_values}"))
    return ExperimentResult(config=config, rows=rows, verdicts=verdicts)


def _run_rademacher_study(config: ExperimentConfig) -> ExperimentResult:
    model = config.build_model()
    c = model.constants
    radii = [float(r) for r in config.params.get(
        "radii", [0.5, 1.0, bd.theorem_radius(c.m, c.b)])]
    K = int(config.params.get("K", 200))
    sseed = derive_seed(config.master_seed, "rademacher-study", "sample")
    sample = model.draw_sample(config.sample_size, seed=sseed)
    sigma_seed = derive_seed(config.master_seed, "rademacher-study", "signs")

    rows: list[MetricRow] = []
    verdicts: list[Verdict] = []
    estimates = []
    res_errors = []
    for R in radii:
        est = rd.empirical_rademacher(model, sample, R=R, K=K,
                                      optimizer="grid" if model.dim <= 2
                                      else "multi-start-ascent",
                                      seed=sigma_seed)
        thm = bd.covering_bound_theorem(model, R, sample.n)
        closed = bd.covering_gen_bound(model, R, sample.n)
        spath = seed_path(config.master_seed, "rademacher-study", f"R={R}")
        rows.append(MetricRow(config.experiment, "rademacher-estimate", R,
                              est.estimate, est.ci_lo, est.ci_hi,
                              closed.rademacher, spath))
        rows.append(MetricRow(config.experiment, "covering-theorem-bound", R,
                              thm, seed_path=spath))
        rows.append(MetricRow(config.experiment, "covering-closed-form", R,
                              closed.rademacher, seed_path=spath))
        hw = 0.5 * (est.ci_hi - est.ci_lo)
        chain_ok = est.estimate - 2.0 * hw <= thm <= closed.rademacher
        margin = min(thm - (est.estimate - 2.0 * hw), closed.rademacher - thm)
        verdicts.append(Verdict(f"rademacher-chain-R={R:g}", chain_ok, margin,
                                f"est={est.estimate:.4f} thm={thm:.4f} "
                                f"closed={closed.rademacher:.4f}"))
        estimates.append(est.estimate)
        res_errors.append(est.resolution_error
                          if math.isfinite(est.resolution_error) else 0.0)
    # nested classes give monotone sups up to the grid resolution error
    mono = all(estimates[i] <= estimates[i + 1] + res_errors[i + 1]
               for i in range(len(estimates) - 1))
    verdicts.append(Verdict("rademacher-monotone-in-R", mono,
                            min((estimates[i + 1] + res_errors[i + 1]
                                 - estimates[i]
                                 for i in range(len(estimates) - 1)),
                                default=0.0),
                            f"estimates={['%.4f' % e for e in estimates]}"))
    return ExperimentResult(config=config, rows=rows, verdicts=verdicts)


# -- the lemma suite ----------------------------------------------------------


def _ball_points(rng: np.random.Generator, n: int, d: int,
                 radius: float) -> np.ndarray:
    g = rng.standard_normal((n, d))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return g / norms * (radius * rng.random((n, 1)) ** (1.0 / d))


def sandwich_check(model: LossModel, sample: SampleSet, probes: int,
                   seed: int, radius: float = 10.0,
                   tol: float = 1e-9) -> tuple[bool, float]:
    """Both sandwich inequalities on random (x, c); margin is the worst slack."""
    rng = np.random.default_rng(seed)
    c = model.constants
    X = _ball_points(rng, probes, model.dim, radius)
    cs = rng.uniform(1e-6, 1.0 - 1e-12, size=probes)
    fx = model.empirical_loss(X, sample)
    fcx = model.empirical_loss(cs[:, None] * X, sample)
    xsq = np.einsum("ij,ij->i", X, X)
    f0 = model.empirical_loss(np.zeros(model.dim), sample)
    g0 = float(np.linalg.norm(model.empirical_grad(np.zeros(model.dim), sample)))
    lower = fcx + 0.5 * (1.0 - cs**2) * c.m * xsq + c.b * np.log(cs)
    upper = f0 + 0.5 * g0 * g0 + 0.5 * (c.M + 1.0) * xsq
    margin = float(min((fx - lower).min(), (upper - fx).min()))
    return margin >= -tol, margin


def level_set_radius_check(model: LossModel, sample: SampleSet, level: float,
                           inf_f: float, probes: int, seed: int,
                           tol: float = 1e-9) -> tuple[bool, float]:
    """Rejection-probe the sublevel-set radius inequality at one level."""
    c = model.constants
    bound = (4.0 / c.m) * (level + 0.5 * c.b * math.log(2.0) - inf_f)
    rng = np.random.default_rng(seed)
    kept = 0
    margin = math.inf
    radius = math.sqrt(max(bound, 1e-12)) * 1.5 + 1.0
    while kept < probes:
        X = _ball_points(rng, 4 * probes, model.dim, radius)
        mask = model.empirical_loss(X, sample) <= level
        if not mask.any():
            break
        xsq = np.einsum("ij,ij->i", X[mask], X[mask])
        margin = min(margin, float((bound - xsq).min()))
        kept += int(mask.sum())
    return margin >= -tol, margin


def shell_points(model: LossModel, sample: SampleSet, level: float, count: int,
                 seed: int, value_tol: float = 1e-3) -> np.ndarray:
    """Points with |L_n - level| <= value_tol found by ray bisection."""
    rng = np.random.default_rng(seed)
    d = model.dim
    dirs = rng.standard_normal((count, d))
    dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True), 1e-12)
    c = model.constants
    inf_proxy = 0.0  # losses are nonnegative
    hi = math.sqrt((4.0 / c.m) * (level + 0.5 * c.b * math.log(2.0)
                                  - inf_proxy)) + 1.0
    lo_r = np.zeros(count)
    hi_r = np.full(count, hi)
    # grow hi until the loss exceeds the level on every ray
    for _ in range(60):
        vals = model.empirical_loss(hi_r[:, None] * dirs, sample)
        under = vals <= level
        if not under.any():
            break
        hi_r[under] *= 1.5
    for _ in range(200):
        mid = 0.5 * (lo_r + hi_r)
        vals = model.empirical_loss(mid[:, None] * dirs, sample)
        below = vals < level
        lo_r = np.where(below, mid, lo_r)
        hi_r = np.where(below, hi_r, mid)
        if np.all(np.abs(vals - level) <= value_tol):
            break
    return 0.5 * (lo_r + hi_r)[:, None] * dirs


def separation_check(model: LossModel, sample: SampleSet, r0: float,
                     delta: float, probes: int, seed: int) -> tuple[bool, float]:
    """Distance between the r0 sublevel set and the r1-threshold shell.

    Samples ``probes`` points in each set and asserts the minimum pairwise
    distance is at least delta, with r1 from the threshold formula.
    """
    inf_f = empirical_min(model, sample).value
    r1 = bd.r1_threshold(model, sample, r0, delta, inf_f=inf_f)
    c = model.constants
    rng = np.random.default_rng(seed)
    radius = math.sqrt((4.0 / c.m) * (r0 + 0.5 * c.b * math.log(2.0) - inf_f))
    inner = []
    have = 0
    while have < probes:
        X = _ball_points(rng, 4 * probes, model.dim, radius + 1e-9)
        X = X[model.empirical_loss(X, sample) <= r0]
        inner.append(X)
        have += X.shape[0]
    inner_pts = np.concatenate(inner)[:probes]
    shell = shell_points(model, sample, r1, probes,
                         seed=int(rng.integers(2**31)))
    min_d = math.inf
    chunk = 1024
    for i in range(0, probes, chunk):
        block = shell[i:i + chunk]
        d2 = (np.sum(block**2, axis=1)[:, None]
              + np.sum(inner_pts**2, axis=1)[None, :]
              - 2.0 * block @ inner_pts.T)
        min_d = min(min_d, float(np.sqrt(max(d2.min(), 0.0))))
    return min_d >= delta, min_d - delta


def lemma_suite(config: ExperimentConfig, models=None,
                quick: bool = False) -> ExperimentResult:
    """Run every inequality check against the built-in models.

    Verdict margins are the worst slack observed; a negative margin beyond
    tolerance fails the check.  ``quick`` shrinks Monte Carlo sizes for use
    inside larger test suites.
    """
    sched = config.build_schedule()
    master = config.master_seed
    probes = 2000 if quick else 10_000
    mc_reps = 200 if quick else 1000
    verdicts: list[Verdict] = []
    rows: list[MetricRow] = []
    if models is None:
        models = builtin_models()

    for model in models:
        fam = model.family
        sample = model.draw_sample(config.sample_size,
                                   seed=derive_seed(master, "suite", fam))

        rep = verify_regularity(model, probe_count=500,
                                seed=derive_seed(master, "regularity", fam))
        verdicts.append(Verdict(f"assumption-regularity/{fam}", rep.passed,
                                0.0 if rep.passed else -1.0,
                                ",".join(rep.violations) or "all probes ok"))

        ok, margin = sandwich_check(model, sample, probes,
                                    seed=derive_seed(master, "sandwich", fam))
        verdicts.append(Verdict(f"dissipative-sandwich/{fam}", ok, margin))

        inf_f = empirical_min(model, sample).value
        level = inf_f + 1.0
        ok, margin = level_set_radius_check(
            model, sample, level, inf_f, probes,
            seed=derive_seed(master, "levelset", fam))
        verdicts.append(Verdict(f"level-set-radius/{fam}", ok, margin))

        # moment bound for the annealed process
        lam, C2 = bd.lyapunov_constants(model.constants.m, model.constants.b,
                                        model.dim, sched.gamma0, 2.0)
        x0 = np.full(model.dim, 1.5)
        noise = NoiseStream(seed=derive_seed(master, "moment", fam), h=2e-3)
        times = [0.5, 1.0, 2.0]
        ens = run_sde(model, sample, "sa-continuous", x0, record_times=times,
                      noise=noise, schedule=sched, replicas=mc_reps)
        worst = math.inf
        for j, t in enumerate(times):
            vals = np.sum(ens.states[:, j, :] ** 2, axis=1)
            lo, hi = bootstrap_mean_ci(vals, seed=j)
            hw = 0.5 * (hi - lo)
            rhs = bd.moment_bound(float(x0 @ x0), lam, C2, t)
            worst = min(worst, rhs - (vals.mean() - 2.0 * hw))
        verdicts.append(Verdict(f"moment-bound/{fam}", worst >= 0.0, worst))

        ok, margin = separation_check(
            model, sample, r0=inf_f + 1.0, delta=1.0,
            probes=probes // 2, seed=derive_seed(master, "separation", fam))
        verdicts.append(Verdict(f"separation-r1/{fam}", ok, margin))

    # schedule checks
    rng = np.random.default_rng(derive_seed(master, "alpha"))
    const = Schedule(mode="constant", gamma0=2.0)
    worst = -math.inf
    for _ in range(20 if quick else 100):
        s = float(rng.uniform(0.0, 100.0))
        t = float(rng.uniform(0.0, 10.0))
        worst = max(worst, abs(const.alpha(s, t) - (s + t)))
    verdicts.append(Verdict("alpha-constant-identity", worst <= 1e-8,
                            1e-8 - worst, f"max |alpha-(s+t)|={worst:.2e}"))
    worst = math.inf
    for _ in range(20 if quick else 100):
        s = float(rng.uniform(0.0, 1000.0))
        t = float(rng.uniform(0.0, 50.0))
        worst = min(worst, sched.alpha(s, t) - (s + t))
    verdicts.append(Verdict("alpha-lower-bound", worst >= -1e-9, worst))
    s_big = 1e6
    a_big = sched.alpha(s_big, s_big ** (2.0 / 3.0))
    in_band = s_big + s_big ** (2.0 / 3.0) <= a_big <= s_big + 2 * s_big ** (2.0 / 3.0)
    verdicts.append(Verdict("alpha-two-sided-large-s", in_band,
                            min(a_big - (s_big + s_big ** (2.0 / 3.0)),
                                s_big + 2 * s_big ** (2.0 / 3.0) - a_big)))

    # flow divergence tail on the quadratic model
    from .losses import quadratic_data
    qmodel = quadratic_data(1)
    qsample = qmodel.draw_sample(8, seed=derive_seed(master, "div-sample"))
    div = flow_divergence_probability(
        qmodel, qsample, [0.0], gamma_s=50.0, delta=1.0, t=1.0,
        replicas=mc_reps * 2,
        noise=NoiseStream(seed=derive_seed(master, "divergence"), h=1e-3))
    verdicts.append(Verdict("divergence-tail/quadratic-data",
                            div.ci_lo <= div.bound, div.bound - div.ci_lo,
                            f"estimate={div.estimate:.4f} bound={div.bound:.4f}"))

    # Rademacher chain on a small quadratic instance
    qs = qmodel.draw_sample(16, seed=derive_seed(master, "rad-sample"))
    est = rd.empirical_rademacher(qmodel, qs, R=2.0, K=50 if quick else 200,
                                  seed=derive_seed(master, "rad-signs"))
    thm = bd.covering_bound_theorem(qmodel, 2.0, qs.n)
    closed = bd.covering_gen_bound(qmodel, 2.0, qs.n)
    hw = 0.5 * (est.ci_hi - est.ci_lo)
    chain_ok = est.estimate - 2 * hw <= thm <= closed.rademacher
    verdicts.append(Verdict("rademacher-chain/quadratic-data", chain_ok,
                            min(thm - (est.estimate - 2 * hw),
                                closed.rademacher - thm)))

    for v in verdicts:
        rows.append(MetricRow(config.experiment, v.check, 0.0,
                              1.0 if v.passed else 0.0, None, None, None,
                              seed_path(master, "lemma-suite")))
    return ExperimentResult(config=config, rows=rows, verdicts=verdicts)


# -- dispatch and persistence --------------------------------------------------


def run_experiment(config: ExperimentConfig, resume: bool = False,
                   quick: bool = False) -> ExperimentResult:
    """Dispatch one experiment and stamp its wall clock."""
    start = time.perf_counter()
    if config.experiment == "bounds-report":
        result = _run_bounds_report(config)
    elif config.experiment == "gen-gap":
        result = _run_gen_gap(config, resume)
    elif config.experiment == "sa-convergence":
        result = _run_sa_convergence(config, resume)
    elif config.experiment == "sa-discretization":
        result = _run_sa_discretization(config, resume)
    elif config.experiment == "rademacher-study":
        result = _run_rademacher_study(config)
    elif config.experiment == "lemma-suite":
        result = lemma_suite(config, quick=quick)
    else:
        raise UsageError(f"unknown experiment {config.experiment!r}")
    result.wall_clock = time.perf_counter() - start
    return result


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def emit(result: ExperimentResult, formats=("csv", "json", "plot-data"),
         output_dir: str | None = None) -> list[str]:
    """Write result files; returns the paths written.

    csv: one row per grid point per metric.  json: full round-trip dump with
    provenance.  plot-data: per metric, five columns x, y, ci_lo, ci_hi,
    overlay.
    """
    outdir = output_dir or result.config.output_dir
    os.makedirs(outdir, exist_ok=True)
    exp = result.config.experiment
    written = []
    if "csv" in formats:
        path = os.path.join(outdir, f"{exp}_metrics.csv")
        with open(path, "w") as fh:
            fh.write("experiment,metric,x,value,ci_lo,ci_hi,overlay,seed_path\n")
            for r in result.rows:
                fh.write(",".join([r.experiment, r.metric, _fmt(r.x),
                                   _fmt(r.value), _fmt(r.ci_lo), _fmt(r.ci_hi),
                                   _fmt(r.overlay), r.seed_path]) + "\n")
        written.append(path)
        if result.verdicts:
            vpath = os.path.join(outdir, f"{exp}_verdicts.csv")
            with open(vpath, "w") as fh:
                fh.write("check,passed,margin,detail\n")
                for v in result.verdicts:
                    detail = v.detail.replace(",", ";")
                    fh.write(f"{v.check},{int(v.passed)},{_fmt(v.margin)},"
                             f"{detail}\n")
            written.append(vpath)
    if "json" in formats:
        path = os.path.join(outdir, f"{exp}_result.json")
        with open(path, "w") as fh:
            json.dump(result.to_dict(), fh, sort_keys=True, indent=2)
        written.append(path)
    if "plot-data" in formats:
        metrics = sorted({r.metric for r in result.rows})
        for metric in metrics:
            safe = metric.replace("/", "-").replace("@", "-").replace("=", "")
            path = os.path.join(outdir, f"{exp}_{safe}.plot.csv")
            with open(path, "w") as fh:
                fh.write("x,y,ci_lo,ci_hi,overlay\n")
                for r in result.rows:
                    if r.metric == metric:
                        fh.write(",".join([_fmt(r.x), _fmt(r.value),
                                           _fmt(r.ci_lo), _fmt(r.ci_hi),
                                           _fmt(r.overlay)]) + "\n")
            written.append(path)
    return written
