"""Reusable experiment building blocks: scenarios, identification, sweeps.

Everything here is deterministic under a root seed.  Sweep replications
draw their seeds from a counter-based scheme keyed on (sweep point,
replication), so parallel execution order cannot change results.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from timopigp import beam as beam_mod
from timopigp import gp, mcmc, placement
from timopigp.beam import BeamConfig, NoiseSpec
from timopigp.data import BoundaryCondition, Dataset
from timopigp.gp import Theta
from timopigp.kernels import KernelParams
from timopigp.mcmc import Flat, McmcConfig, UniformBounded
from timopigp.placement import (PlacementCriterion, PlacementProblem,
                                greedy_place)
from timopigp.quantities import QuantityKind

THREADS_ENV = "TIMO_PIGP_THREADS"

LOAD_NOISE_FACTOR = 1e-6  # effectively exact informed load, numerically safe


def worker_count() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def scenario_beam(r: float, L: float = 1.0, EI: float = 1.0,
                  q0: float = 1.0, h: float = 0.1) -> BeamConfig:
    """Simply supported scenario with the requested rigidity factor."""
    kGA = 3.0 * EI / (L**2 * r)
    return BeamConfig(L=L, EI_true=EI, kGA_true=kGA, q0=q0, h=h)


def deflection_bcs(beam: BeamConfig) -> list:
    return [BoundaryCondition(kind=QuantityKind.DEFLECTION,
                              x=np.array([0.0, beam.L]))]


def support_bcs(beam: BeamConfig) -> list:
    """Full simple-support conditions: zero deflection and zero moment.

    Moment-free ends complete the fourth-order problem; without them the
    latent deflection keeps a free cubic component that degrades stiffness
    identifiability.
    """
    ends = np.array([0.0, beam.L])
    return [BoundaryCondition(kind=QuantityKind.DEFLECTION, x=ends),
            BoundaryCondition(kind=QuantityKind.MOMENT, x=ends)]


def placement_params(beam: BeamConfig, ell: float | None = None,
                     sigma_s2: float = 1.0) -> KernelParams:
    """Pre-data kernel parameters for placement (no learned theta exists)."""
    return KernelParams(sigma_s2=sigma_s2,
                        ell=ell if ell is not None else beam.L / 8.0,
                        EI=beam.EI_true, kGA=beam.kGA_true)


def sensor_set(beam: BeamConfig, kind: QuantityKind,
               criterion: PlacementCriterion,
               n_sensors: int = 7, n_candidates: int = 31,
               ell: float | None = None, with_bcs: bool = True) -> np.ndarray:
    """Greedy sensor locations for one domain on an equidistant grid."""
    problem = PlacementProblem(
        candidates=np.linspace(0.0, beam.L, n_candidates),
        kinds=kind,
        n_sensors=n_sensors,
        params=placement_params(beam, ell=ell),
        bcs=deflection_bcs(beam) if with_bcs else [],
        criterion=criterion,
    )
    result = greedy_place(problem)
    return np.array(sorted(x for x, _ in result.selected))


def synth_identification_data(beam: BeamConfig, w_locs, phi_locs, snr: float,
                              seed: int, ndp: int = 1,
                              inform_load: bool = True) -> list:
    """Noisy deflection + rotation data with the informed load dataset."""
    datasets = []
    seq = np.random.SeedSequence(seed)
    sub = seq.generate_state(2)
    if w_locs is not None and len(w_locs):
        locs = np.tile(np.asarray(w_locs, float), ndp)
        datasets.append(beam_mod.synthesize_dataset(
            beam, QuantityKind.DEFLECTION, locs,
            NoiseSpec(snr=snr, seed=int(sub[0])),
            label="w", learn_noise=True))
    if phi_locs is not None and len(phi_locs):
        locs = np.tile(np.asarray(phi_locs, float), ndp)
        datasets.append(beam_mod.synthesize_dataset(
            beam, QuantityKind.ROTATION, locs,
            NoiseSpec(snr=snr, seed=int(sub[1])),
            label="phi", learn_noise=True))
    if inform_load:
        base = w_locs if w_locs is not None and len(w_locs) else phi_locs
        q_locs = np.asarray(base, float)
        datasets.append(Dataset(
            kind=QuantityKind.LOAD, x=q_locs,
            y=np.full(q_locs.size, beam.q0),
            sigma_n=LOAD_NOISE_FACTOR * abs(beam.q0), label="q"))
    return datasets


def stiffness_priors(beam: BeamConfig, lo: float = 0.5,
                     hi: float = 1.5) -> dict:
    """Bounded-uniform stiffness priors around truth; flat elsewhere."""
    return {
        "EI": UniformBounded(lo * beam.EI_true, hi * beam.EI_true),
        "kGA": UniformBounded(lo * beam.kGA_true, hi * beam.kGA_true),
    }


def default_theta0(datasets, beam: BeamConfig, priors: dict) -> Theta:
    """Start point: prior midpoints for bounded params, data heuristics else."""
    def midpoint(name, fallback):
        spec = priors.get(name)
        if isinstance(spec, UniformBounded):
            return 0.5 * (spec.lo + spec.hi)
        return fallback

    EI0 = midpoint("EI", beam.EI_true)
    kGA0 = midpoint("kGA", beam.kGA_true)
    ell0 = beam.L / 4.0

    w_sets = [d for d in datasets if d.kind is QuantityKind.DEFLECTION]
    ref = w_sets[0] if w_sets else datasets[0]
    y_var = float(np.var(ref.y)) or 1.0
    # De-scale by the diagonal amplification of the reference quantity's
    # kernel so sigma_s2 starts near the latent process scale.
    a = EI0 / kGA0
    if ref.kind is QuantityKind.DEFLECTION:
        gain = 1.0 + 2.0 * a / ell0**2 + 3.0 * (a / ell0**2) ** 2
    elif ref.kind is QuantityKind.ROTATION:
        gain = (1.0 / ell0**2 + 6.0 * a / ell0**4
                + 105.0 * a**2 / ell0**6)
    else:
        gain = 1.0
    sigma_s2_0 = max(y_var / gain, 1e-300)

    sigma_n0 = {}
    for ds in datasets:
        if ds.learn_noise:
            init = ds.sigma_n if ds.sigma_n > 0 else 0.05 * np.std(ds.y)
            sigma_n0[ds.label] = float(max(init, 1e-12))
    return Theta(sigma_s2=sigma_s2_0, ell=ell0, EI=EI0, kGA=kGA0,
                 sigma_n=sigma_n0)


def identify(datasets, bcs, beam: BeamConfig, cfg: McmcConfig,
             priors: dict | None = None,
             theta0: Theta | None = None) -> mcmc.PosteriorChain:
    """Run the stiffness-identification chain for one scenario."""
    priors = priors if priors is not None else stiffness_priors(beam)
    theta0 = theta0 or default_theta0(datasets, beam, priors)
    return mcmc.run_chain(datasets, bcs, priors, cfg, theta0)


def replication_seed(root_seed: int, point: int, rep: int) -> int:
    """Counter-based child seed; independent of execution order."""
    seq = np.random.SeedSequence(entropy=root_seed, spawn_key=(point, rep))
    return int(seq.generate_state(1)[0])


@dataclass(frozen=True)
class SweepTask:
    beam_r: float
    snr: float
    ndp: int
    seed: int
    chain_seed: int
    mcmc: McmcConfig
    bc_mode: str = "support"  # "none" | "deflection" | "support"
    use_deflections: bool = True
    use_rotations: bool = True
    n_sensors: int = 7
    n_candidates: int = 31


def _run_sweep_task(task: SweepTask) -> dict:
    beam = scenario_beam(task.beam_r)
    w_locs = sensor_set(beam, QuantityKind.DEFLECTION,
                        PlacementCriterion.PHYSICS_INFORMED_ENTROPY,
                        n_sensors=task.n_sensors,
                        n_candidates=task.n_candidates) \
        if task.use_deflections else None
    phi_locs = sensor_set(beam, QuantityKind.ROTATION,
                          PlacementCriterion.PHYSICS_INFORMED_ENTROPY,
                          n_sensors=task.n_sensors,
                          n_candidates=task.n_candidates) \
        if task.use_rotations else None
    datasets = synth_identification_data(beam, w_locs, phi_locs,
                                         snr=task.snr, seed=task.seed,
                                         ndp=task.ndp)
    if task.bc_mode == "support":
        bcs = support_bcs(beam)
    elif task.bc_mode == "deflection":
        bcs = deflection_bcs(beam)
    else:
        bcs = []
    cfg = McmcConfig(n_total=task.mcmc.n_total, n_b=task.mcmc.n_b,
                     n_t=task.mcmc.n_t,
                     proposal_scale=task.mcmc.proposal_scale,
                     seed=task.chain_seed, adapt=task.mcmc.adapt)
    try:
        chain = identify(datasets, bcs, beam, cfg)
    except Exception as exc:  # per-point failures recorded, sweep continues
        return {"error": repr(exc)}
    stats = mcmc.summarize(chain)
    return {
        "EI_mean": stats["EI"]["mean"] / beam.EI_true,
        "EI_std": stats["EI"]["std"] / beam.EI_true,
        "kGA_mean": stats["kGA"]["mean"] / beam.kGA_true,
        "kGA_std": stats["kGA"]["std"] / beam.kGA_true,
        "acceptance": chain.acceptance_rate,
    }


def run_sweep(tasks: list, parallel: bool = True) -> list:
    """Execute replication tasks, optionally on a process pool."""
    n_workers = worker_count()
    if parallel and n_workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            return list(pool.map(_run_sweep_task, tasks))
    return [_run_sweep_task(t) for t in tasks]


def _aggregate(point_results: list) -> dict:
    ok = [r for r in point_results if "error" not in r]
    out = {"n_reps": len(ok), "n_failed": len(point_results) - len(ok)}
    if not ok:
        return out
    for param in ("EI", "kGA"):
        means = np.array([r[f"{param}_mean"] for r in ok])
        stds = np.array([r[f"{param}_std"] for r in ok])
        out[f"{param}_mean"] = float(means.mean())
        out[f"{param}_mean_std"] = float(means.std())
        out[f"{param}_post_std"] = float(stds.mean())
        out[f"{param}_ci_lo"] = float(means.mean() - 1.96 * stds.mean())
        out[f"{param}_ci_hi"] = float(means.mean() + 1.96 * stds.mean())
    return out


def _sweep_points(point_tasks: dict, parallel: bool) -> dict:
    flat, index = [], []
    for value, tasks in point_tasks.items():
        for t in tasks:
            flat.append(t)
            index.append(value)
    results = run_sweep(flat, parallel=parallel)
    grouped: dict = {v: [] for v in point_tasks}
    for value, res in zip(index, results):
        grouped[value].append(res)
    return {value: _aggregate(res) for value, res in grouped.items()}


def noise_study(snrs, replications: int, root_seed: int, cfg: McmcConfig,
                r: float = 1.0, parallel: bool = True) -> dict:
    points = {}
    for p, snr in enumerate(snrs):
        points[snr] = [
            SweepTask(beam_r=r, snr=snr, ndp=1,
                      seed=replication_seed(root_seed, p, rep),
                      chain_seed=replication_seed(root_seed, p, rep) ^ 0x9E37,
                      mcmc=cfg)
            for rep in range(replications)]
    return _sweep_points(points, parallel)


def rigidity_study(r_values, replications: int, root_seed: int,
                   cfg: McmcConfig, snr: float = 10.0,
                   use_deflections: bool = True, use_rotations: bool = True,
                   parallel: bool = True) -> dict:
    points = {}
    for p, r in enumerate(r_values):
        points[r] = [
            SweepTask(beam_r=r, snr=snr, ndp=1,
                      seed=replication_seed(root_seed, 1000 + p, rep),
                      chain_seed=replication_seed(root_seed, 1000 + p,
                                                  rep) ^ 0x9E37,
                      mcmc=cfg, use_deflections=use_deflections,
                      use_rotations=use_rotations)
            for rep in range(replications)]
    return _sweep_points(points, parallel)


def ndp_study(ndp_values, replications: int, root_seed: int,
              cfg: McmcConfig, snr: float = 10.0, r: float = 1.0,
              parallel: bool = True) -> dict:
    points = {}
    for p, ndp in enumerate(ndp_values):
        points[ndp] = [
            SweepTask(beam_r=r, snr=snr, ndp=int(ndp),
                      seed=replication_seed(root_seed, 2000 + p, rep),
                      chain_seed=replication_seed(root_seed, 2000 + p,
                                                  rep) ^ 0x9E37,
                      mcmc=cfg)
            for rep in range(replications)]
    return _sweep_points(points, parallel)


def effective_sample_size(x: np.ndarray) -> float:
    """Initial-positive-sequence ESS estimate for one chain component."""
    x = np.asarray(x, float)
    n = x.size
    if n < 4:
        return float(n)
    xc = x - x.mean()
    var = float(xc @ xc) / n
    if var == 0:
        return float(n)
    rho_sum = 0.0
    for lag in range(1, n // 2):
        rho = float(xc[:-lag] @ xc[lag:]) / ((n - lag) * var)
        if rho <= 0.0:
            break
        rho_sum += rho
    return float(n / (1.0 + 2.0 * rho_sum))
