"""Simulation of the gradient-Langevin processes and their annealed variants.

Processes: the exact discrete recursion
``X_{k+1} = X_k - eta grad L_n(X_k) + sqrt(2 eta / beta) eps_k``, the
fixed-temperature diffusion ``dX = -grad L_n(X) dt + sqrt(2/beta) dW``, the
annealed diffusion with ``sqrt(2/gamma(t)) dW``, its step-size discretization
whose drift is frozen at the last grid time ``T_k`` (both as an Euler-Maruyama
scheme and as the exact grid-time recursion with aggregated noise variance
``int 2/gamma``), and the noise-free gradient flow.

Integrator: Euler-Maruyama with a fixed internal step, record times snapped to
the step grid, and for the annealed processes the diffusion coefficient
evaluated at the left endpoint of each step.  Path suprema (exit and
divergence estimators) are evaluated on the step grid only, which
underestimates continuous suprema by an O(sqrt(h log(1/h))) margin; reports
carry the step size used.

Randomness: each replica owns an independent generator derived from
``(seed, replica_index)``, and Gaussians are produced by inverse-CDF transform
of 53-bit uniforms, so parallel and sequential execution over replicas agree
bit for bit, and a run at internal step ``c * h_noise`` consumes exactly ``c``
fine increments per step.  That makes runs at different internal steps share
one underlying Brownian path when given the same stream, which the
discretization-consistency experiment relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from .errors import NumericError, UsageError
from .losses import LossModel, SampleSet
from .schedules import Schedule, harmonic, harmonic_inverse
from .statutils import bootstrap_mean_ci, wilson_interval

PROCESSES = ("sgld-discrete", "sgld-continuous", "sa-continuous",
             "sa-discrete", "gradient-flow")

_TWO_53 = float(1 << 53)


@dataclass(frozen=True)
class NoiseStream:
    """Reproducible Brownian-increment source.

    ``h`` is the fine internal step the stream is defined on; runs may use any
    integer multiple of it.  ``seed`` plus the replica index determine the
    whole path of that replica.
    """

    seed: int
    h: float = 1e-3
    generator: str = "pcg64-inverse-cdf"

    def __post_init__(self):
        if self.h <= 0:
            raise UsageError("noise step h must be positive")

    def replica_rng(self, replica: int) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(replica,))
        return np.random.Generator(np.random.PCG64(ss))


def standard_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Inverse-CDF standard normals from 53-bit uniforms in (0, 1)."""
    u = (rng.integers(0, 1 << 53, size=shape, dtype=np.uint64) + 0.5) / _TWO_53
    return ndtri(u)


class _ReplicaNormals:
    """Block reader of per-replica standard normal streams."""

    def __init__(self, noise: NoiseStream, replicas: range, dim: int):
        self._rngs = [noise.replica_rng(r) for r in replicas]
        self._dim = dim

    def block(self, n: int) -> np.ndarray:
        """(R, n, dim) standard normals, one independent stream per replica."""
        return np.stack([standard_normal(rng, (n, self._dim))
                         for rng in self._rngs])


@dataclass
class TrajectoryEnsemble:
    """A batch of simulated paths recorded at fixed times.

    ``states`` has shape (replicas, len(times), dim).  ``provenance`` records
    everything needed to reproduce the run.
    """

    process: str
    times: np.ndarray
    states: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.all(np.isfinite(self.states)):
            raise NumericError("non-finite state in trajectory ensemble")
        if np.any(np.diff(self.times) < 0):
            raise UsageError("record times must be sorted ascending")

    @property
    def n_replicas(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[2]

    def norms(self) -> np.ndarray:
        """(replicas, times) Euclidean norms."""
        return np.linalg.norm(self.states, axis=2)

    def to_csv(self, path) -> None:
        """Columnar dump: replica, time, x0..x{d-1}."""
        d = self.dim
        with open(path, "w") as fh:
            fh.write("replica,time," + ",".join(f"x{i}" for i in range(d)) + "\n")
            for r in range(self.n_replicas):
                for j, t in enumerate(self.times):
                    coords = ",".join(repr(float(v)) for v in self.states[r, j])
                    fh.write(f"{r},{t!r},{coords}\n")

    def summary_dict(self, p: int = 2, n_boot: int = 500, seed: int = 0) -> dict:
        est = moment_estimate(self, p=p, n_boot=n_boot, seed=seed)
        return {
            "process": self.process,
            "replicas": self.n_replicas,
            "times": [float(t) for t in self.times],
            "moment_p": p,
            "moments": [float(v) for v in est.values],
            "moment_ci_lo": [float(v) for v in est.ci_lo],
            "moment_ci_hi": [float(v) for v in est.ci_hi],
            "provenance": self.provenance,
        }


def _as_range(replicas) -> range:
    if isinstance(replicas, range):
        return replicas
    if isinstance(replicas, (int, np.integer)):
        if replicas < 1:
            raise UsageError("need at least one replica")
        return range(int(replicas))
    raise UsageError("replicas must be an int or a range")


def _snap_record_times(record_times: Sequence[float], h: float) -> np.ndarray:
    times = np.asarray(list(record_times), dtype=float)
    if times.size == 0:
        raise UsageError("need at least one record time")
    if np.any(times < 0):
        raise UsageError("record times must be nonnegative")
    idx = np.rint(times / h).astype(np.int64)
    if np.any(np.diff(idx) < 0):
        raise UsageError("record times must be sorted ascending")
    return idx


class _Integrator:
    """Shared Euler-Maruyama loop advancing one or more coupled processes."""

    def __init__(self, model: LossModel, sample: SampleSet | None,
                 processes: Sequence[str], x0, *, noise: NoiseStream,
                 h: float | None, beta: float | None, schedule: Schedule | None,
                 replicas) -> None:
        for pid in processes:
            if pid not in PROCESSES or pid == "sgld-discrete":
                raise UsageError(f"unsupported SDE process {pid!r}")
        self.model = model
        self.sample = sample
        self.processes = list(processes)
        self.replicas = _as_range(replicas)
        self.noise = noise
        h = noise.h if h is None else h
        sub = int(round(h / noise.h))
        if sub < 1 or abs(sub * noise.h - h) > 1e-9 * max(h, 1.0):
            raise UsageError("internal step h must be a multiple of noise.h")
        self.substeps = sub
        self.h = sub * noise.h
        self.beta = beta
        self.schedule = schedule
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        if x0.shape != (model.dim,):
            raise UsageError(f"x0 must have dimension {model.dim}")
        self.x0 = x0
        for pid in self.processes:
            if pid == "sgld-continuous" and beta is None:
                raise UsageError("sgld-continuous needs beta")
            if pid in ("sa-continuous", "sa-discrete") and schedule is None:
                raise UsageError(f"{pid} needs a schedule")
        if sample is None:
            raise UsageError("a sample set is required")

    def _diffusion_scales(self, pid: str, times: np.ndarray) -> np.ndarray:
        if pid == "gradient-flow":
            return np.zeros_like(times)
        if pid == "sgld-continuous":
            val = 0.0 if math.isinf(self.beta) else math.sqrt(2.0 / self.beta)
            return np.full_like(times, val)
        gam = self.schedule.gamma(times)
        return np.sqrt(2.0 / np.asarray(gam, dtype=float))

    def run(self, record_times: Sequence[float],
            observer=None) -> list[TrajectoryEnsemble]:
        """Advance all processes on the common grid with shared increments.

        ``observer(step_index, states_list)`` is called at every grid point
        (including 0 and the final step) before the step is applied; it is
        used by the path-supremum estimators.
        """
        h = self.h
        rec_idx = _snap_record_times(record_times, h)
        n_steps = int(rec_idx.max())
        R = len(self.replicas)
        d = self.model.dim
        states = [np.tile(self.x0, (R, 1)) for _ in self.processes]
        outs = [np.empty((R, rec_idx.size, d)) for _ in self.processes]

        need_noise = any(p != "gradient-flow" for p in self.processes)
        gen = _ReplicaNormals(self.noise, self.replicas, d) if need_noise else None

        freeze_buffers: dict[int, np.ndarray] = {}
        freeze_idx: np.ndarray | None = None
        buf_len = int(math.ceil(1.0 / h)) + 3
        if "sa-discrete" in self.processes and n_steps > 0:
            a = np.arange(n_steps, dtype=float) * h
            k = harmonic_inverse(a)
            t_k = np.asarray(harmonic(k), dtype=float)
            freeze_idx = np.clip(np.rint(t_k / h).astype(np.int64), 0,
                                 np.arange(n_steps))
            for ip, pid in enumerate(self.processes):
                if pid == "sa-discrete":
                    freeze_buffers[ip] = np.empty((buf_len, R, d))

        # positions in the record list served by each step index
        rec_positions: dict[int, list[int]] = {}
        for pos, i in enumerate(rec_idx):
            rec_positions.setdefault(int(i), []).append(pos)

        chunk = 2048
        i = 0
        with np.errstate(over="ignore", invalid="ignore"):
            while i <= n_steps:
                csteps = min(chunk, n_steps - i)
                times = (i + np.arange(csteps + 1, dtype=float)) * h
                if csteps > 0 and gen is not None:
                    raw = gen.block(csteps * self.substeps)
                    dW = raw.reshape(R, csteps, self.substeps, d).sum(axis=2)
                    dW *= math.sqrt(self.noise.h)
                else:
                    dW = None
                scales = [self._diffusion_scales(p, times[:-1]) if csteps > 0
                          else None for p in self.processes]
                for j in range(csteps + 1):
                    step = i + j
                    for ip in range(len(self.processes)):
                        for pos in rec_positions.get(step, ()):
                            outs[ip][:, pos, :] = states[ip]
                        if ip in freeze_buffers:
                            freeze_buffers[ip][step % buf_len] = states[ip]
                    if observer is not None:
                        observer(step, states)
                    if j == csteps:
                        break
                    for ip, pid in enumerate(self.processes):
                        if pid == "sa-discrete":
                            src = freeze_buffers[ip][freeze_idx[step] % buf_len]
                        else:
                            src = states[ip]
                        drift = -self.model.empirical_grad(src, self.sample)
                        new = states[ip] + h * drift
                        if dW is not None and scales[ip][j] != 0.0:
                            new += scales[ip][j] * dW[:, j, :]
                        if not np.all(np.isfinite(new)):
                            raise NumericError(
                                f"non-finite state in {pid} at step {step + 1}"
                            )
                        states[ip] = new
                i += csteps
                if csteps == 0:
                    break

        times_out = rec_idx.astype(float) * h
        ensembles = []
        for ip, pid in enumerate(self.processes):
            prov = {
                "process": pid,
                "model": self.model.to_dict(),
                "seed": self.noise.seed,
                "noise_h": self.noise.h,
                "h": h,
                "x0": [float(v) for v in self.x0],
                "replicas": [self.replicas.start, self.replicas.stop],
                "beta": None if self.beta is None else float(self.beta),
                "schedule": None if self.schedule is None else {
                    "mode": self.schedule.mode,
                    "gamma0": self.schedule.gamma0,
                },
            }
            ensembles.append(TrajectoryEnsemble(
                process=pid, times=times_out, states=outs[ip], provenance=prov))
        return ensembles


def run_sde(model: LossModel, sample: SampleSet, process: str, x0, *,
            record_times: Sequence[float], noise: NoiseStream,
            beta: float | None = None, schedule: Schedule | None = None,
            h: float | None = None, replicas=1) -> TrajectoryEnsemble:
    """Euler-Maruyama run of one continuous-time process.

    ``process`` is one of "sgld-continuous", "sa-continuous", "sa-discrete",
    "gradient-flow".  Record times are snapped onto the step grid.
    """
    integ = _Integrator(model, sample, [process], x0, noise=noise, h=h,
                        beta=beta, schedule=schedule, replicas=replicas)
    return integ.run(record_times)[0]


def run_sgld_discrete(model: LossModel, sample: SampleSet, x0, *, eta: float,
                      beta: float, k_max: int, noise: NoiseStream,
                      record_iterates: Sequence[int] | None = None,
                      replicas=1) -> TrajectoryEnsemble:
    """Exact discrete recursion, no integrator error.

    ``beta = inf`` turns the noise off (plain gradient descent).  Record
    points are iteration indices; the time axis of the result is ``k * eta``.
    """
    if eta <= 0 or k_max < 1:
        raise UsageError("need eta > 0 and k_max >= 1")
    if beta <= 0:
        raise UsageError("beta must be positive (inf allowed)")
    reps = _as_range(replicas)
    if record_iterates is None:
        record_iterates = [k_max]
    rec = np.asarray(list(record_iterates), dtype=np.int64)
    if np.any(rec < 0) or np.any(rec > k_max) or np.any(np.diff(rec) < 0):
        raise UsageError("record iterates must be sorted within [0, k_max]")
    R = len(reps)
    d = model.dim
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (d,):
        raise UsageError(f"x0 must have dimension {d}")
    scale = 0.0 if math.isinf(beta) else math.sqrt(2.0 * eta / beta)
    gen = _ReplicaNormals(noise, reps, d) if scale > 0 else None

    state = np.tile(x0, (R, 1))
    out = np.empty((R, rec.size, d))
    rec_positions: dict[int, list[int]] = {}
    for pos, k in enumerate(rec):
        rec_positions.setdefault(int(k), []).append(pos)

    chunk = 4096
    k = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while k <= k_max:
            csteps = min(chunk, k_max - k)
            eps = gen.block(csteps) if (gen is not None and csteps > 0) else None
            for j in range(csteps + 1):
                step = k + j
                for pos in rec_positions.get(step, ()):
                    out[:, pos, :] = state
                if j == csteps:
                    break
                drift = -model.empirical_grad(state, sample)
                new = state + eta * drift
                if eps is not None:
                    new = new + scale * eps[:, j, :]
                if not np.all(np.isfinite(new)):
                    raise NumericError(f"non-finite state at iteration {step + 1}")
                state = new
            k += csteps
            if csteps == 0:
                break

    prov = {"process": "sgld-discrete", "model": model.to_dict(),
            "seed": noise.seed, "eta": eta, "beta": float(beta),
            "x0": [float(v) for v in x0], "replicas": [reps.start, reps.stop]}
    return TrajectoryEnsemble(process="sgld-discrete",
                              times=rec.astype(float) * eta,
                              states=out, provenance=prov)


def run_sa_discrete_exact(model: LossModel, sample: SampleSet, x0, *,
                          schedule: Schedule, k_max: int, noise: NoiseStream,
                          replicas=1) -> TrajectoryEnsemble:
    """Exact-in-distribution recursion at the grid times T_0..T_{k_max}.

    Advances ``Z_{k+1} = Z_k - eta_{k+1} grad L_n(Z_k) + sqrt(eta~_k) eps_k``
    where ``eta~_k`` integrates ``2/gamma`` over (T_k, T_{k+1}] by quadrature,
    so the iterates have the law of the step-size discretization sampled at
    the grid times.  Only practical for moderate ``k_max``.
    """
    if k_max < 1:
        raise UsageError("k_max must be >= 1")
    reps = _as_range(replicas)
    R = len(reps)
    d = model.dim
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    gen = _ReplicaNormals(noise, reps, d)
    eps = gen.block(k_max)
    state = np.tile(x0, (R, 1))
    out = np.empty((R, k_max + 1, d))
    out[:, 0, :] = state
    for k in range(k_max):
        eta_step = harmonic(k + 1) - harmonic(k)
        var = schedule.eta_tilde(k)
        drift = -model.empirical_grad(state, sample)
        state = state + eta_step * drift + math.sqrt(var) * eps[:, k, :]
        if not np.all(np.isfinite(state)):
            raise NumericError(f"non-finite state at grid index {k + 1}")
        out[:, k + 1, :] = state
    times = np.asarray(harmonic(np.arange(k_max + 1)), dtype=float)
    prov = {"process": "sa-discrete-exact", "model": model.to_dict(),
            "seed": noise.seed, "x0": [float(v) for v in x0],
            "replicas": [reps.start, reps.stop]}
    return TrajectoryEnsemble(process="sa-discrete", times=times,
                              states=out, provenance=prov)


# -- coupled runs and distance statistics -------------------------------------


@dataclass
class CoupledRun:
    first: TrajectoryEnsemble
    second: TrajectoryEnsemble
    times: np.ndarray
    mean_distance: np.ndarray
    distance_ci: np.ndarray     # (T, 2)
    mean_rho2: np.ndarray | None
    rho2_ci: np.ndarray | None


def run_coupled(model: LossModel, sample: SampleSet, processes: tuple[str, str],
                x0, *, record_times: Sequence[float], noise: NoiseStream,
                beta: float | None = None, schedule: Schedule | None = None,
                h: float | None = None, replicas=64, rho2_report=None,
                ci_seed: int = 0) -> CoupledRun:
    """Run two processes on the identical Brownian path and report distances.

    The per-time mean of ``|Z - Z'|`` and, when a coupling report is given, of
    ``rho2(Z, Z')`` are synchronous-coupling upper bounds on the corresponding
    transport distances between the two laws.
    """
    integ = _Integrator(model, sample, list(processes), x0, noise=noise, h=h,
                        beta=beta, schedule=schedule, replicas=replicas)
    ens_a, ens_b = integ.run(record_times)
    diff = ens_a.states - ens_b.states
    dist = np.linalg.norm(diff, axis=2)          # (R, T)
    T = dist.shape[1]
    mean_dist = dist.mean(axis=0)
    dist_ci = np.empty((T, 2))
    for j in range(T):
        dist_ci[j] = bootstrap_mean_ci(dist[:, j], seed=ci_seed + j)
    mean_rho2 = rho2_ci = None
    if rho2_report is not None:
        vals = np.empty_like(dist)
        for j in range(T):
            vals[:, j] = rho2_report.rho2(ens_a.states[:, j, :],
                                          ens_b.states[:, j, :])
        mean_rho2 = vals.mean(axis=0)
        rho2_ci = np.empty((T, 2))
        for j in range(T):
            rho2_ci[j] = bootstrap_mean_ci(vals[:, j], seed=ci_seed + 7919 + j)
    return CoupledRun(first=ens_a, second=ens_b, times=ens_a.times,
                      mean_distance=mean_dist, distance_ci=dist_ci,
                      mean_rho2=mean_rho2, rho2_ci=rho2_ci)


# -- probability estimators ----------------------------------------------------


@dataclass(frozen=True)
class ProbabilityEstimate:
    estimate: float
    ci_lo: float
    ci_hi: float
    replicas: int
    bound: float | None = None
    grid_h: float | None = None


def flow_divergence_probability(model: LossModel, sample: SampleSet, x0, *,
                                gamma_s: float, delta: float, t: float,
                                replicas: int, noise: NoiseStream,
                                h: float | None = None) -> ProbabilityEstimate:
    """Monte Carlo estimate of P(sup_{u<=t} |X_u - Y_u| >= delta).

    ``X`` is the gradient flow and ``Y`` the fixed-temperature diffusion at
    inverse temperature ``gamma_s``, both from ``x0`` on the same grid.  The
    supremum runs over grid points.  Returns a Wilson 95% interval and the
    closed-form tail bound for comparison.
    """
    from .bounds import divergence_tail_bound

    if delta <= 0 or t <= 0:
        raise UsageError("delta and t must be positive")
    exceeded = np.zeros(int(replicas), dtype=bool)

    def observer(step, states):
        d = np.linalg.norm(states[0] - states[1], axis=1)
        exceeded[:] |= d >= delta

    integ = _Integrator(model, sample, ["gradient-flow", "sgld-continuous"],
                        x0, noise=noise, h=h, beta=gamma_s, schedule=None,
                        replicas=replicas)
    integ.run([t], observer=observer)
    count = int(exceeded.sum())
    lo, hi = wilson_interval(count, int(replicas))
    bound = divergence_tail_bound(model.constants.M, model.dim, gamma_s,
                                  delta, t)
    return ProbabilityEstimate(estimate=count / replicas, ci_lo=lo, ci_hi=hi,
                               replicas=int(replicas), bound=bound,
                               grid_h=integ.h)


def exit_probability(model: LossModel, sample: SampleSet, x0, *, level: float,
                     t_end: float, replicas: int, noise: NoiseStream,
                     beta: float | None = None,
                     schedule: Schedule | None = None,
                     h: float | None = None) -> ProbabilityEstimate:
    """Fraction of replicas whose running loss supremum exceeds ``level``.

    Uses the annealed diffusion when a schedule is given, otherwise the
    fixed-temperature one.  ``level`` must exceed the starting loss.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if level <= model.empirical_loss(x0, sample):
        raise UsageError("exit level must exceed the starting loss")
    exceeded = np.zeros(int(replicas), dtype=bool)

    def observer(step, states):
        vals = model.empirical_loss(states[0], sample)
        exceeded[:] |= vals > level

    process = "sa-continuous" if schedule is not None else "sgld-continuous"
    if t_end == 0.0:
        lo, hi = wilson_interval(0, int(replicas))
        return ProbabilityEstimate(0.0, lo, hi, int(replicas), grid_h=None)
    integ = _Integrator(model, sample, [process], x0, noise=noise, h=h,
                        beta=beta, schedule=schedule, replicas=replicas)
    integ.run([t_end], observer=observer)
    count = int(exceeded.sum())
    lo, hi = wilson_interval(count, int(replicas))
    return ProbabilityEstimate(estimate=count / replicas, ci_lo=lo, ci_hi=hi,
                               replicas=int(replicas), grid_h=integ.h)


# -- moments -------------------------------------------------------------------


@dataclass(frozen=True)
class MomentEstimate:
    times: np.ndarray
    values: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    p: int


def moment_estimate(ensemble: TrajectoryEnsemble, p: int = 2,
                    n_boot: int = 1000, seed: int = 0) -> MomentEstimate:
    """Plug-in estimate of E|Z_t|^p per record time with bootstrap intervals."""
    if p < 2 or p % 2 != 0:
        raise UsageError("p must be an even integer >= 2")
    norms_p = ensemble.norms() ** p            # (R, T)
    T = norms_p.shape[1]
    values = norms_p.mean(axis=0)
    lo = np.empty(T)
    hi = np.empty(T)
    for j in range(T):
        lo[j], hi[j] = bootstrap_mean_ci(norms_p[:, j], n_boot=n_boot,
                                         seed=seed + j)
    return MomentEstimate(times=ensemble.times.copy(), values=values,
                          ci_lo=lo, ci_hi=hi, p=p)
