"""Seeded Monte Carlo experiments on far-field distinguishability.

Every trial draws from its own generator seeded by ``(seed, trial index)``, so
results do not depend on how trials are scheduled across workers. Trials
whose forward solve fails its residual certificate are kept in the record
list with ``excluded=True``.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import beta

from . import specfun
from .farfield import (DirectionGrid, add_noise, fmt, l2_distance, l2_norm)
from .geometry import (Obstacle, RigidMotion, diameter, hausdorff_distance,
                       regions_intersect, rotational_symmetry_order)
from .identify import IdentifyConfig, ShapeDictionary, identify
from .scatter import IncidentPlaneWave, MfsConfig, ScatterError, far_field, solve


def trial_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def sample_incident(rng: np.random.Generator, k_min: float, k_max: float) -> IncidentPlaneWave:
    """k uniform on (k_min, k_max), direction uniform on the circle."""
    if not (0 < k_min < k_max and math.isfinite(k_max)):
        raise ValueError("need 0 < k_min < k_max < inf")
    k = rng.uniform(k_min, k_max)
    angle = rng.uniform(0.0, 2 * np.pi)
    return IncidentPlaneWave(k, angle)


def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


@dataclass(frozen=True)
class ExperimentConfig:
    k_min: float = 0.5
    k_max: float = 3.0
    trials: int = 200
    seed: int = 0
    epsilons: tuple = (1e-4, 1e-3, 1e-2, 1e-1)
    grid: DirectionGrid = DirectionGrid()
    solver: MfsConfig = MfsConfig()

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 < self.k_min < self.k_max:
            raise ValueError("need 0 < k_min < k_max")
        eps = tuple(float(e) for e in self.epsilons)
        if any(e <= 0 for e in eps) or list(eps) != sorted(eps):
            raise ValueError("epsilons must be positive and ascending")
        object.__setattr__(self, "epsilons", eps)


@dataclass(frozen=True)
class TrialRecord:
    index: int
    k: float
    d_angle: float
    delta: float
    excluded: bool = False
    reason: str = ""
    seconds: float = field(default=0.0, compare=False)


def pattern_delta(obs_a: Obstacle, obs_b: Obstacle, wave: IncidentPlaneWave,
                  grid: DirectionGrid, solver: MfsConfig) -> float:
    """Relative far-field distance, normalized by the larger of the two norms."""
    pa = far_field(solve(obs_a, wave, solver), grid)
    pb = pa if obs_b == obs_a else far_field(solve(obs_b, wave, solver), grid)
    scale = max(l2_norm(pa), l2_norm(pb))
    return l2_distance(pa, pb) / scale


def _run_trial(obs_a, obs_b, cfg: ExperimentConfig, index: int) -> TrialRecord:
    wave = sample_incident(trial_rng(cfg.seed, index), cfg.k_min, cfg.k_max)
    start = time.perf_counter()
    try:
        delta = pattern_delta(obs_a, obs_b, wave, cfg.grid, cfg.solver)
    except ScatterError as exc:
        return TrialRecord(index, wave.k, wave.angle, float("nan"), True, str(exc),
                           time.perf_counter() - start)
    return TrialRecord(index, wave.k, wave.angle, delta, False, "",
                       time.perf_counter() - start)


def geometry_block(obs_a: Obstacle, obs_b: Obstacle) -> dict:
    """Hausdorff distance and diameters entering d_H <= diam + diam'."""
    ca, cb = obs_a.boundary, obs_b.boundary
    dh = hausdorff_distance(ca, cb)
    da, db = diameter(ca), diameter(cb)
    return {"hausdorff": dh, "diam_a": da, "diam_b": db,
            "bound": da + db, "bound_holds": bool(dh <= da + db),
            "regions_intersect": regions_intersect(ca, cb)}


def disk_eigen_wavenumbers(obs: Obstacle, k_min: float, k_max: float) -> list:
    """Interior Dirichlet (j_{n,m}/a) or Neumann (j'_{n,m}/a) eigen-wavenumbers of
    a disk obstacle inside [k_min, k_max]; empty for other shapes or impedance."""
    if obs.base.family != "circle" or obs.bc.kind == "impedance":
        return []
    a = obs.base.params["radius"]
    zero = specfun.bessel_j_zero if obs.bc.kind == "dirichlet" else specfun.bessel_dj_zero
    out = []
    n = 0
    while n <= specfun.MAX_ORDER and zero(n, 1) / a <= k_max:
        m = 1
        while True:
            try:
                kz = zero(n, m) / a
            except ValueError:
                break
            if kz > k_max:
                break
            if kz >= k_min:
                out.append({"n": n, "m": m, "k": kz, "kind": obs.bc.kind})
            m += 1
        n += 1
    return sorted(out, key=lambda r: (r["k"], r["n"]))


@dataclass(frozen=True)
class ExperimentReport:
    records: tuple
    epsilons: tuple
    geometry: dict
    annotations: tuple = ()

    @property
    def included(self) -> list:
        return [r for r in self.records if not r.excluded]

    @property
    def n_excluded(self) -> int:
        return sum(r.excluded for r in self.records)

    def probability_below(self, eps: float) -> float:
        deltas = np.array([r.delta for r in self.included])
        return float(np.mean(deltas < eps)) if deltas.size else float("nan")

    @property
    def cdf(self) -> dict:
        return {eps: self.probability_below(eps) for eps in self.epsilons}

    @property
    def min_record(self) -> TrialRecord | None:
        inc = self.included
        return min(inc, key=lambda r: (r.delta, r.index)) if inc else None

    def to_json(self) -> dict:
        best = self.min_record
        return {
            "trials": len(self.records), "included": len(self.included),
            "excluded": self.n_excluded,
            "excluded_indices": [r.index for r in self.records if r.excluded],
            "min_delta": None if best is None else best.delta,
            "min_delta_at": None if best is None else
            {"index": best.index, "k": best.k, "d_angle": best.d_angle},
            "max_delta": max((r.delta for r in self.included), default=None),
            "cdf": [{"epsilon": e, "probability": p} for e, p in self.cdf.items()],
            "geometry": self.geometry, "annotations": list(self.annotations)}

    def trials_csv(self) -> str:
        lines = ["index,k,d_angle,delta,excluded"]
        for r in self.records:
            lines.append(f"{r.index},{fmt(r.k)},{fmt(r.d_angle)},{fmt(r.delta)},"
                         f"{int(r.excluded)}")
        return "\n".join(lines) + "\n"


def distinguish_experiment(obs_a: Obstacle, obs_b: Obstacle, cfg: ExperimentConfig,
                           threads: int = 1) -> ExperimentReport:
    """Distances between the far fields of two obstacles for random (k, d)."""
    records = _map(lambda i: _run_trial(obs_a, obs_b, cfg, i), range(cfg.trials), threads)
    notes = [{"obstacle": tag, **row} for tag, obs in (("a", obs_a), ("b", obs_b))
             for row in disk_eigen_wavenumbers(obs, cfg.k_min, cfg.k_max)]
    return ExperimentReport(tuple(records), cfg.epsilons, geometry_block(obs_a, obs_b),
                            tuple(notes))


def stability_profile(report: ExperimentReport, epsilons=None) -> dict:
    """eps -> empirical P(delta < eps), plus the largest listed eps with zero
    probability (every eps below it has zero probability as well)."""
    epsilons = tuple(epsilons or report.epsilons)
    profile = [(float(e), report.probability_below(e)) for e in sorted(epsilons)]
    zero = [e for e, p in profile if p == 0.0]
    return {"profile": profile, "largest_zero_epsilon": max(zero) if zero else None,
            "smallest_zero_epsilon": min(zero) if zero else None}


@dataclass(frozen=True)
class KScanResult:
    ks: np.ndarray
    deltas: np.ndarray
    excluded: np.ndarray
    d_angle: float
    annotations: tuple

    def to_csv(self) -> str:
        lines = ["k,delta"]
        lines += [f"{fmt(k)},{fmt(d)}" for k, d in zip(self.ks, self.deltas)]
        return "\n".join(lines) + "\n"

    def annotations_json(self) -> dict:
        return {"d_angle": self.d_angle, "k_min": float(self.ks[0]),
                "k_max": float(self.ks[-1]), "excluded": int(self.excluded.sum()),
                "eigen_wavenumbers": list(self.annotations)}


def k_scan(obs_a: Obstacle, obs_b: Obstacle, d_angle: float, ks,
           grid: DirectionGrid | None = None, solver: MfsConfig | None = None,
           threads: int = 1) -> KScanResult:
    """delta(k) along a wavenumber grid for a fixed incident direction."""
    grid = grid or DirectionGrid()
    solver = solver or MfsConfig()
    ks = np.asarray(ks, dtype=float)

    def one(k):
        try:
            return pattern_delta(obs_a, obs_b, IncidentPlaneWave(k, d_angle), grid, solver)
        except ScatterError:
            return float("nan")

    deltas = np.array(_map(one, ks, threads))
    notes = [{"obstacle": tag, **row} for tag, obs in (("a", obs_a), ("b", obs_b))
             for row in disk_eigen_wavenumbers(obs, float(ks.min()), float(ks.max()))]
    return KScanResult(ks, deltas, np.isnan(deltas), float(d_angle), tuple(notes))


# ---------------------------------------------------------------------------
# Identification success rate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SuccessConfig:
    trials: int = 100
    seed: int = 0
    noise: float = 0.0
    box: tuple = ((-1.0, 1.0), (-1.0, 1.0))
    retry: bool = False
    identify: IdentifyConfig = IdentifyConfig()
    solver: MfsConfig = MfsConfig()


@dataclass(frozen=True)
class SuccessTrial:
    index: int
    true_id: str
    found_id: str
    theta: float
    z: tuple
    d_angle: float
    misfit: float
    theta_error: float | None
    ambiguous: bool
    retried: bool
    success: bool


def clopper_pearson(successes: int, n: int, level: float = 0.95) -> tuple:
    alpha = 1 - level
    lo = 0.0 if successes == 0 else float(beta.ppf(alpha / 2, successes, n - successes + 1))
    hi = 1.0 if successes == n else float(beta.ppf(1 - alpha / 2, successes + 1, n - successes))
    return lo, hi


@dataclass(frozen=True)
class SuccessReport:
    trials: tuple

    @property
    def successes(self) -> int:
        return sum(t.success for t in self.trials)

    @property
    def rate(self) -> float:
        return self.successes / len(self.trials)

    @property
    def interval(self) -> tuple:
        return clopper_pearson(self.successes, len(self.trials))

    @property
    def failures(self) -> list:
        return [t for t in self.trials if not t.success]

    @property
    def max_theta_error(self) -> float:
        errs = [t.theta_error for t in self.trials if t.success and t.theta_error is not None]
        return max(errs, default=0.0)

    def to_json(self) -> dict:
        lo, hi = self.interval
        return {"trials": len(self.trials), "successes": self.successes,
                "rate": self.rate, "ci95": [lo, hi],
                "ambiguous": sum(t.ambiguous for t in self.trials),
                "retried": sum(t.retried for t in self.trials),
                "max_theta_error": self.max_theta_error,
                "failures": [{"index": t.index, "true_id": t.true_id, "found_id": t.found_id,
                              "theta": t.theta, "z": list(t.z), "d_angle": t.d_angle,
                              "misfit": t.misfit, "ambiguous": t.ambiguous}
                             for t in self.failures]}

    def trials_csv(self) -> str:
        lines = ["index,true_id,found_id,theta,z_x,z_y,d_angle,misfit,theta_error,"
                 "ambiguous,success"]
        for t in self.trials:
            err = "" if t.theta_error is None else fmt(t.theta_error)
            lines.append(f"{t.index},{t.true_id},{t.found_id},{fmt(t.theta)},{fmt(t.z[0])},"
                         f"{fmt(t.z[1])},{fmt(t.d_angle)},{fmt(t.misfit)},{err},"
                         f"{int(t.ambiguous)},{int(t.success)}")
        return "\n".join(lines) + "\n"


def _theta_error(found: float, true: float, order: int) -> float | None:
    if order == 0:
        return None
    period = 2 * np.pi / order
    return abs(math.remainder(found - true, period))


def _measure(dictionary, j, pose, d_angle, noise, noise_seed, solver):
    entry = dictionary.entries[j]
    obs = entry.obstacle(RigidMotion(pose[0], pose[1]))
    p = far_field(solve(obs, IncidentPlaneWave(dictionary.k, d_angle), solver),
                  dictionary.obs_grid)
    return add_noise(p, noise, noise_seed)


def identification_success_rate(dictionary: ShapeDictionary, cfg: SuccessConfig,
                                threads: int = 1) -> SuccessReport:
    """Identify random placements of random entries from one measurement each."""
    orders = [rotational_symmetry_order(e.curve) for e in dictionary.entries]

    def one(i):
        rng = trial_rng(cfg.seed, i)
        j = int(rng.integers(len(dictionary.entries)))
        theta = float(rng.uniform(0, 2 * np.pi))
        z = tuple(float(rng.uniform(lo, hi)) for lo, hi in cfg.box)
        d_angle = float(rng.uniform(0, 2 * np.pi))
        noise_seed = int(rng.integers(2 ** 63))
        id_cfg = replace(cfg.identify, location="known", z=z, strict=False)
        meas = _measure(dictionary, j, (theta, z), d_angle, cfg.noise, noise_seed, cfg.solver)
        result = identify(meas, dictionary, id_cfg)
        retried = False
        if cfg.retry and result.flags["ambiguous"]:
            d_angle = float(rng.uniform(0, 2 * np.pi))
            meas = _measure(dictionary, j, (theta, z), d_angle, cfg.noise,
                            int(rng.integers(2 ** 63)), cfg.solver)
            result = identify(meas, dictionary, id_cfg)
            retried = True
        true_id = dictionary.entries[j].id
        success = result.best_id == true_id
        err = _theta_error(result.pose.theta, theta, orders[j]) if success else None
        return SuccessTrial(i, true_id, result.best_id, theta, z, d_angle, result.misfit,
                            err, result.flags["ambiguous"], retried, success)

    return SuccessReport(tuple(_map(one, range(cfg.trials), threads)))
