"""Single-measurement identification of an obstacle from a shape dictionary.

The target is one of the dictionary shapes after an unknown rigid motion,
``z + U(theta) Omega_j``. Each dictionary entry stores its full far-field
matrix, so the pattern of any pose is predicted without new forward solves:
rotation shifts both angles of the matrix (trig interpolation) and
translation multiplies by the unimodular factor exp(-i k (x_hat - d) . z).
Identification ranks entries by the relative L2 misfit of the best pose,
found by a coarse grid followed by Nelder-Mead refinement.
"""

from __future__ import annotations

import json
import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .farfield import (DirectionGrid, FarFieldError, FarFieldMatrix, FarFieldPattern,
                       check_bandwidth, fmt, l2_norm, read_matrix, relative_distance,
                       rotate_predict, trig_basis, translate_pattern, translation_factor,
                       write_matrix)
from .geometry import (BoundaryCondition, Obstacle, ParametricCurve, RigidMotion,
                       curve_from_spec)
from .scatter import MfsConfig, ResidualTooLarge, far_field_matrix_columns, solve_many

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"


class IdentificationError(Exception):
    """Base for identification outcomes that are not a clean answer."""

    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


class NotInDictionary(IdentificationError):
    """Best misfit above threshold: the data do not come from the dictionary."""


class AmbiguousIdentification(IdentificationError):
    """Top two candidates are not separated by the ambiguity margin."""

    def __init__(self, msg, result=None, candidates=()):
        super().__init__(msg, result)
        self.candidates = tuple(candidates)


class PrecomputeError(ResidualTooLarge):
    def __init__(self, entry_id, angle, residual):
        super().__init__(f"entry {entry_id!r}: solver certificate failed at incident "
                         f"angle {angle} (residual {residual:.2e})", residual, angle)
        self.entry_id = entry_id


# ---------------------------------------------------------------------------
# Dictionary
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DictionaryEntry:
    id: str
    curve: ParametricCurve
    bc: BoundaryCondition = BoundaryCondition()

    def obstacle(self, motion: RigidMotion | None = None) -> Obstacle:
        return Obstacle(self.curve, motion or RigidMotion(), self.bc)


@dataclass(frozen=True)
class Pose:
    theta: float = 0.0
    z: tuple = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta) % (2 * np.pi))
        object.__setattr__(self, "z", (float(self.z[0]), float(self.z[1])))

    @property
    def motion(self) -> RigidMotion:
        return RigidMotion(self.theta, self.z)


@dataclass(frozen=True, eq=False)
class ShapeDictionary:
    entries: tuple
    k: float
    obs_grid: DirectionGrid
    inc_grid: DirectionGrid
    matrices: tuple
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("dictionary entry ids must be unique")
        if len(self.matrices) != len(self.entries):
            raise ValueError("one far-field matrix per entry is required")
        for F in self.matrices:
            if (F.obs_grid, F.inc_grid) != (self.obs_grid, self.inc_grid) or \
                    not math.isclose(F.k, self.k, rel_tol=1e-12):
                raise ValueError("all matrices must share k and grids")

    @property
    def ids(self) -> list:
        return [e.id for e in self.entries]

    def index(self, entry_id: str) -> int:
        return self.ids.index(entry_id)

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        items = []
        for i, (entry, F) in enumerate(zip(self.entries, self.matrices)):
            name = f"{i:02d}_{re.sub(r'[^A-Za-z0-9_.-]', '_', entry.id)}.csv"
            write_matrix(directory / name, F)
            items.append({"id": entry.id, "shape": entry.curve.to_spec(),
                          "bc": entry.bc.to_spec(), "matrix": name,
                          **self.provenance.get("entries", {}).get(entry.id, {})})
        manifest = {"k": self.k, "M": self.obs_grid.M, "L": self.inc_grid.M,
                    "solver": self.provenance.get("solver", {}), "entries": items}
        (directory / MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n")

    @classmethod
    def load(cls, directory) -> "ShapeDictionary":
        directory = Path(directory)
        manifest = json.loads((directory / MANIFEST).read_text())
        entries, matrices, certs = [], [], {}
        for item in manifest["entries"]:
            entries.append(DictionaryEntry(item["id"], curve_from_spec(item["shape"]),
                                           BoundaryCondition.from_spec(item["bc"])))
            matrices.append(read_matrix(directory / item["matrix"]))
            certs[item["id"]] = {key: item[key] for key in ("max_residual", "n_sources")
                                 if key in item}
        return cls(tuple(entries), float(manifest["k"]), DirectionGrid(manifest["M"]),
                   DirectionGrid(manifest["L"]), tuple(matrices),
                   {"solver": manifest.get("solver", {}), "entries": certs})


def _precompute_entry(entry, k, obs_grid, inc_grid, cfg):
    try:
        sols = solve_many(entry.obstacle(), k, inc_grid.angles, cfg)
    except ResidualTooLarge as exc:
        raise PrecomputeError(entry.id, exc.angle, exc.residual) from None
    samples = far_field_matrix_columns(sols, obs_grid)
    cert = {"max_residual": max(s.residual for s in sols),
            "n_sources": sols[0].config.n_sources}
    return FarFieldMatrix(k, obs_grid, inc_grid, samples), cert


def precompute(entries: Sequence[DictionaryEntry], k: float,
               obs_grid: DirectionGrid | None = None, inc_grid: DirectionGrid | None = None,
               cfg: MfsConfig | None = None, threads: int = 1) -> ShapeDictionary:
    """Far-field matrices of every entry on the incident grid (one factorization each)."""
    obs_grid = obs_grid or DirectionGrid()
    inc_grid = inc_grid or DirectionGrid()
    cfg = cfg or MfsConfig()
    entries = tuple(entries)

    def work(entry):
        return _precompute_entry(entry, k, obs_grid, inc_grid, cfg)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(work, entries))
    else:
        results = [work(e) for e in entries]
    for entry, (F, cert) in zip(entries, results):
        check_bandwidth(F)
        logger.info("entry %s: max residual %.2e with %d sources", entry.id,
                    cert["max_residual"], cert["n_sources"])
    provenance = {"solver": asdict(cfg),
                  "entries": {e.id: cert for e, (_, cert) in zip(entries, results)}}
    return ShapeDictionary(entries, float(k), obs_grid, inc_grid,
                           tuple(F for F, _ in results), provenance)


# ---------------------------------------------------------------------------
# Prediction and misfit
# ---------------------------------------------------------------------------

def _check_measurement(measured: FarFieldPattern, dictionary: ShapeDictionary):
    if measured.grid != dictionary.obs_grid:
        raise FarFieldError("measurement grid differs from the dictionary grid")
    if not math.isclose(measured.k, dictionary.k, rel_tol=1e-12):
        raise FarFieldError(f"measurement k={measured.k} but dictionary k={dictionary.k}")


def _rotated_samples(F: FarFieldMatrix, thetas, d_angle) -> np.ndarray:
    """Rows: samples of rotate_predict(F, theta, d_angle) for each theta."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    inc = trig_basis(F.inc_grid.M, d_angle - thetas)           # (T, L)
    coeff = inc @ F.spectrum.T                                  # (T, M) over obs modes
    # evaluating on the grid shifted by -theta is a phase ramp plus an inverse FFT
    m = F.obs_grid.M
    modes = np.fft.fftfreq(m, 1.0 / m)
    shift = np.exp(-1j * np.multiply.outer(thetas, modes))
    shift[:, m // 2] = np.cos(m // 2 * thetas)
    return m * np.fft.ifft(coeff * shift, axis=1)


def predict(dictionary: ShapeDictionary, j: int, pose: Pose, d_angle: float) -> FarFieldPattern:
    """Pattern of entry j placed at ``pose`` for incident direction d_angle."""
    rotated = rotate_predict(dictionary.matrices[j], pose.theta, d_angle)
    return translate_pattern(rotated, pose.z)


def misfit(measured: FarFieldPattern, dictionary: ShapeDictionary, j: int, pose: Pose) -> float:
    """|measured - predicted|_L2 / |measured|_L2 for entry j at ``pose``."""
    _check_measurement(measured, dictionary)
    predicted = predict(dictionary, j, pose, measured.d_angle)
    diff = measured.samples - predicted.samples
    return float(np.linalg.norm(diff) / np.linalg.norm(measured.samples))


# ---------------------------------------------------------------------------
# Identification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IdentifyConfig:
    """``location`` is "known" (use ``z``) or "search" (grid over ``box``)."""

    location: str = "known"
    z: tuple = (0.0, 0.0)
    box: tuple = ((-1.0, 1.0), (-1.0, 1.0))
    z_step: float | None = None
    theta_steps: int = 64
    starts: int = 3
    refine_iterations: int = 200
    refine_tol: float = 1e-10
    ambiguity_margin: float = 1e-3
    flatness_tol: float = 1e-8
    not_in_dictionary: float = 0.1
    strict: bool = True

    def __post_init__(self):
        if self.location not in ("known", "search"):
            raise ValueError("location must be 'known' or 'search'")
        if self.theta_steps < 1 or self.starts < 1 or self.refine_iterations < 1:
            raise ValueError("counts must be positive")
        if min(self.refine_tol, self.ambiguity_margin, self.flatness_tol,
               self.not_in_dictionary) <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class Candidate:
    id: str
    index: int
    misfit: float
    pose: Pose
    theta_flat: bool


@dataclass(frozen=True)
class IdentificationResult:
    best_id: str
    pose: Pose
    misfit: float
    ranking: tuple
    flags: dict

    def to_json(self) -> dict:
        return {"best_id": self.best_id, "theta": self.pose.theta, "z": list(self.pose.z),
                "misfit": self.misfit,
                "ranking": [{"id": c.id, "misfit": c.misfit, "theta": c.pose.theta,
                             "z": list(c.pose.z), "theta_flat": c.theta_flat}
                            for c in self.ranking],
                "flags": dict(self.flags)}


def _objective_known(target, F, d_angle, norm):
    def f(x):
        pred = _rotated_samples(F, [x[0]], d_angle)[0]
        return float(np.linalg.norm(target - pred) / norm)
    return f


def _objective_search(target, F, k, angles, d_angle, norm):
    def f(x):
        pred = _rotated_samples(F, [x[0]], d_angle)[0]
        pred = pred * translation_factor(k, angles, d_angle, (x[1], x[2]))
        return float(np.linalg.norm(target - pred) / norm)
    return f


def _refine(f, x0, f0, step, cfg: IdentifyConfig):
    x0 = np.asarray(x0, dtype=float)
    simplex = np.vstack([x0, x0 + np.diag(step)])
    res = minimize(f, x0, method="Nelder-Mead",
                   options={"maxiter": cfg.refine_iterations, "xatol": 1e-12,
                            "fatol": cfg.refine_tol, "initial_simplex": simplex})
    if res.fun <= f0:
        return res.x, float(res.fun)
    return x0, f0


def _z_grid(cfg: IdentifyConfig, k: float):
    step = cfg.z_step or math.pi / (2 * k)
    axes = []
    for lo, hi in cfg.box:
        n = max(int(math.floor((hi - lo) / step + 1e-9)) + 1, 1)
        axes.append(lo + step * np.arange(n) + 0.5 * ((hi - lo) - step * (n - 1)))
    gx, gy = np.meshgrid(*axes, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel()], axis=-1), step


def _score_entry(measured, dictionary, j, cfg: IdentifyConfig) -> Candidate:
    F = dictionary.matrices[j]
    k, d_angle = dictionary.k, measured.d_angle
    angles = dictionary.obs_grid.angles
    thetas = 2 * np.pi * np.arange(cfg.theta_steps) / cfg.theta_steps
    dtheta = 2 * np.pi / cfg.theta_steps
    rotated = _rotated_samples(F, thetas, d_angle)              # (T, M)
    if cfg.location == "known":
        target = translate_pattern(measured, (-cfg.z[0], -cfg.z[1])).samples
        norm = float(np.linalg.norm(target))
        coarse = np.linalg.norm(target[None, :] - rotated, axis=1) / norm
        flat = float(np.ptp(coarse)) < cfg.flatness_tol
        f = _objective_known(target, F, d_angle, norm)
        best_x, best_f = None, math.inf
        for i in np.argsort(coarse, kind="stable")[: cfg.starts]:
            x, fx = _refine(f, [thetas[i]], float(coarse[i]), [dtheta / 2], cfg)
            if fx < best_f:
                best_x, best_f = x, fx
        pose = Pose(best_x[0], cfg.z)
    else:
        target = measured.samples
        norm = float(np.linalg.norm(target))
        zs, step = _z_grid(cfg, k)
        phases = np.stack([translation_factor(k, angles, d_angle, z) for z in zs])  # (Z, M)
        # |t - T r|^2 = |t|^2 + |r|^2 - 2 Re <t, T r>, with |T r| = |r|
        cross = (np.conj(target)[None, :] * phases) @ rotated.T                      # (Z, T)
        sq = norm ** 2 + np.sum(np.abs(rotated) ** 2, axis=1)[None, :] - 2 * cross.real
        coarse = np.sqrt(np.maximum(sq, 0.0)) / norm
        zi_best = int(np.argmin(coarse.min(axis=1)))
        flat = float(np.ptp(coarse[zi_best])) < cfg.flatness_tol
        f = _objective_search(target, F, k, angles, d_angle, norm)
        best_x, best_f = None, math.inf
        for flat_idx in np.argsort(coarse, axis=None, kind="stable")[: cfg.starts]:
            zi, ti = np.unravel_index(flat_idx, coarse.shape)
            x0 = [thetas[ti], zs[zi][0], zs[zi][1]]
            x, fx = _refine(f, x0, float(coarse[zi, ti]), [dtheta / 2, step / 2, step / 2], cfg)
            if fx < best_f:
                best_x, best_f = x, fx
        pose = Pose(best_x[0], (best_x[1], best_x[2]))
    entry = dictionary.entries[j]
    return Candidate(entry.id, j, best_f, pose, flat)


def identify(measured: FarFieldPattern, dictionary: ShapeDictionary,
             cfg: IdentifyConfig | None = None, threads: int = 1) -> IdentificationResult:
    """Best dictionary entry and pose explaining one far-field measurement.

    With ``cfg.strict`` (default) a misfit above ``cfg.not_in_dictionary``
    raises :class:`NotInDictionary` and an unresolved top two raises
    :class:`AmbiguousIdentification`; otherwise these are reported in ``flags``.
    Ties go to the lower entry index.
    """
    cfg = cfg or IdentifyConfig()
    _check_measurement(measured, dictionary)
    if l2_norm(measured) == 0:
        raise FarFieldError("measurement is identically zero")
    indices = range(len(dictionary.entries))

    def work(j):
        return _score_entry(measured, dictionary, j, cfg)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            candidates = list(pool.map(work, indices))
    else:
        candidates = [work(j) for j in indices]
    ranking = tuple(sorted(candidates, key=lambda c: (c.misfit, c.index)))
    best = ranking[0]
    ambiguous = len(ranking) > 1 and ranking[1].misfit - best.misfit <= cfg.ambiguity_margin
    outside = best.misfit > cfg.not_in_dictionary
    flags = {"theta_flat": best.theta_flat, "ambiguous": bool(ambiguous),
             "not_in_dictionary": bool(outside)}
    result = IdentificationResult(best.id, best.pose, best.misfit, ranking, flags)
    if cfg.strict:
        if outside:
            raise NotInDictionary(f"best misfit {best.misfit:.3g} exceeds "
                                  f"{cfg.not_in_dictionary}", result)
        if ambiguous:
            raise AmbiguousIdentification(
                f"{ranking[0].id!r} and {ranking[1].id!r} differ by "
                f"{ranking[1].misfit - best.misfit:.3g} in misfit", result, ranking[:2])
    return result


def classify_bc(measured: FarFieldPattern, dictionary: ShapeDictionary,
                cfg: IdentifyConfig | None = None) -> IdentificationResult:
    """Pick the boundary condition among hypotheses sharing one shape."""
    ref = dictionary.entries[0].curve
    for e in dictionary.entries[1:]:
        same = all(np.array_equal(getattr(e.curve, a), getattr(ref, a))
                   for a in ("xc", "xs", "yc", "ys"))
        if not same:
            raise ValueError("boundary-condition hypotheses must share one shape")
    return identify(measured, dictionary, cfg)


# ---------------------------------------------------------------------------
# Separability
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeparabilityReport:
    passed: bool
    min_distance: float
    pair: tuple
    d_angle: float
    theta: float
    trials: int
    floor: float

    def to_json(self) -> dict:
        return {"status": "PASS" if self.passed else "FAIL",
                "min_distance": self.min_distance, "pair": list(self.pair),
                "d_angle": self.d_angle, "theta": self.theta, "trials": self.trials,
                "floor": self.floor}


def separability_check(dictionary: ShapeDictionary, trials: int = 50, seed: int = 0,
                       floor: float = 1e-3) -> SeparabilityReport:
    """Smallest pairwise relative distance between entry patterns over random (d, theta)."""
    n = len(dictionary.entries)
    if n < 2:
        return SeparabilityReport(True, math.inf, (), float("nan"), float("nan"), trials, floor)
    rng = np.random.default_rng(seed)
    best = (math.inf, (), 0.0, 0.0)
    for _ in range(trials):
        d_angle, theta = rng.uniform(0, 2 * np.pi, size=2)
        patterns = [rotate_predict(F, theta, d_angle) for F in dictionary.matrices]
        for a in range(n):
            for b in range(a + 1, n):
                dist = relative_distance(patterns[a], patterns[b])
                if dist < best[0]:
                    best = (dist, (dictionary.entries[a].id, dictionary.entries[b].id),
                            float(d_angle), float(theta))
    dist, pair, d_angle, theta = best
    return SeparabilityReport(dist > floor, dist, pair, d_angle, theta, trials, floor)


def shipped_catalog(bc: BoundaryCondition | None = None) -> list:
    """disk(1), ellipse(1, 0.5) and the kite, sound-hard by default."""
    from .geometry import circle, ellipse, kite
    bc = bc or BoundaryCondition.neumann()
    return [DictionaryEntry("disk", circle(1.0), bc),
            DictionaryEntry("ellipse", ellipse(1.0, 0.5), bc),
            DictionaryEntry("kite", kite(), bc)]


def result_to_text(result: IdentificationResult) -> str:
    lines = [f"{'rank':>4}  {'id':<16} {'misfit':>12}  {'theta':>10}  z"]
    for i, c in enumerate(result.ranking):
        lines.append(f"{i + 1:>4}  {c.id:<16} {c.misfit:12.4e}  {c.pose.theta:10.6f}  "
                     f"({fmt(c.pose.z[0])}, {fmt(c.pose.z[1])})"
                     + ("  [theta flat]" if c.theta_flat else ""))
    return "\n".join(lines)
