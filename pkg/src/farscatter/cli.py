"""Command-line entry point: ``farscatter <command> [options]``.

Each command resolves a configuration (file given by ``--config`` merged with
command-line overrides), writes its data files under ``--out`` and a
``manifest.json`` recording the resolved configuration, seed, version and
file digests. Passing a previous ``manifest.json`` as ``--config`` replays
that run. Human-readable text goes to stderr; the exit code is the machine
contract:

    0 success, 1 assertion failed, 2 config error, 3 solver failure,
    4 identity violation, 5 not in dictionary, 6 ambiguous, 7 separability FAIL
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import tempfile
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .farfield import (DirectionGrid, FarFieldError, FarFieldMatrix, l2_distance,
                       pattern_to_csv, read_pattern, rotate_predict, translate_pattern)
from .geometry import BoundaryCondition, GeometryError, Obstacle, RigidMotion, circle
from .identify import (AmbiguousIdentification, DictionaryEntry, IdentifyConfig,
                       NotInDictionary, ShapeDictionary, identify, precompute,
                       result_to_text, separability_check, shipped_catalog)
from .mc import (ExperimentConfig, SuccessConfig, distinguish_experiment,
                 identification_success_rate, k_scan, stability_profile)
from .scatter import (IncidentPlaneWave, MfsConfig, ScatterError, disk_far_field_series,
                      far_field, far_field_matrix_columns, solve, solve_many)
from .geometry import curve_from_spec

logger = logging.getLogger("farscatter")

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
EXIT_IDENTITY, EXIT_NOT_IN_DICT, EXIT_AMBIGUOUS, EXIT_SEPARABILITY = 4, 5, 6, 7


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------

def _load_json(path: Path) -> dict:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _solver(cfg: dict) -> MfsConfig:
    try:
        return MfsConfig(**cfg.get("solver", {}))
    except TypeError as exc:
        raise ConfigError(f"bad solver section: {exc}") from None


def _obstacle(spec) -> Obstacle:
    if not isinstance(spec, dict):
        raise ConfigError("obstacle description must be a JSON object")
    return Obstacle.from_spec(spec)


DEFAULTS = {
    "forward": {"k": 1.0, "d_angle": 0.0, "M": 128,
                "shape": {"family": "circle", "radius": 1.0, "bc": {"type": "dirichlet"}}},
    "oracle-disk": {"k": 1.0, "d_angle": 0.0, "M": 128, "radius": 1.0,
                    "center": [0.0, 0.0], "bc": {"type": "dirichlet"}},
    "verify-identities": {"k": 2.0, "d_angle": 0.0, "M": 128, "L": 128,
                          "shape": {"family": "trig", "preset": "kite",
                                    "bc": {"type": "dirichlet"}},
                          "motion": {"theta": 0.0, "z": [0.0, 0.0]},
                          "tolerance": 1e-5, "flip_translation": False},
    "precompute-dict": {"k": 2.0, "M": 128, "L": 128, "entries": None},
    "identify": {"dictionary": None, "pattern": None, "location": "known",
                 "z": [0.0, 0.0], "box": [[-1.0, 1.0], [-1.0, 1.0]],
                 "not_in_dictionary": 0.1, "ambiguity_margin": 1e-3},
    "separability": {"dictionary": None, "trials": 50, "floor": 1e-3},
    "mc-distinguish": {"k_min": 0.5, "k_max": 3.0, "trials": 200, "M": 128,
                       "epsilons": [1e-4, 1e-3, 1e-2, 1e-1],
                       "obstacle_a": {"family": "circle", "radius": 1.0},
                       "obstacle_b": {"family": "ellipse", "a": 1.0, "b": 0.9},
                       "assert_min_delta": None},
    "k-scan": {"k_min": 0.5, "k_max": 3.0, "points": 500, "d_angle": 0.0, "M": 128,
               "obstacle_a": {"family": "circle", "radius": 1.0},
               "obstacle_b": {"family": "ellipse", "a": 1.0, "b": 0.9},
               "assert_min_delta": None},
    "id-success": {"dictionary": None, "k": 2.0, "M": 128, "L": 128, "trials": 100,
                   "noise": 0.0, "retry": False, "box": [[-1.0, 1.0], [-1.0, 1.0]],
                   "assert_min_rate": None},
}

# command-line options that override config keys
OVERRIDES = {
    "forward": ("k", "d_angle", "M"),
    "oracle-disk": ("k", "d_angle", "M", "radius"),
    "verify-identities": ("k", "d_angle", "M", "L", "theta", "z", "flip_translation"),
    "precompute-dict": ("k", "M", "L"),
    "identify": ("dictionary", "pattern", "location", "z"),
    "separability": ("dictionary", "trials", "floor"),
    "mc-distinguish": ("k_min", "k_max", "trials", "assert_min_delta"),
    "k-scan": ("k_min", "k_max", "points", "d_angle", "assert_min_delta"),
    "id-success": ("dictionary", "k", "trials", "noise", "retry", "assert_min_rate"),
}


def resolve_config(command: str, args) -> tuple[dict, list]:
    """Defaults <- config file (or replayed manifest) <- command-line overrides."""
    cfg = json.loads(json.dumps(DEFAULTS[command]))
    inputs = []
    if args.config:
        path = Path(args.config)
        data = _load_json(path)
        inputs.append(path)
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
        if "command" in data and "config" in data:
            if data["command"] != command:
                raise ConfigError(f"manifest is for {data['command']!r}, not {command!r}")
            data = data["config"]
        elif command == "forward" and "family" in data:
            data = {"shape": data}
        cfg.update(data)
    for key in OVERRIDES[command]:
        value = getattr(args, key, None)
        if value is None:
            continue
        if key == "theta":
            cfg["motion"] = {**cfg["motion"], "theta": value}
        elif key == "z" and command == "verify-identities":
            cfg["motion"] = {**cfg["motion"], "z": list(value)}
        elif key in ("dictionary", "pattern"):
            cfg[key] = str(value)
        else:
            cfg[key] = list(value) if isinstance(value, (list, tuple)) else value
    cfg["seed"] = args.seed if args.seed is not None else cfg.get("seed", 0)
    return cfg, inputs


# ---------------------------------------------------------------------------
# Output handling
# ---------------------------------------------------------------------------

def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


class Run:
    """Collects outputs of one command and writes them with the manifest."""

    def __init__(self, command, cfg, inputs, out: Path, threads: int):
        self.command, self.cfg, self.out, self.threads = command, cfg, out, threads
        self.inputs = list(inputs)
        self.outputs: dict[str, str] = {}
        self.extra_files: list[Path] = []
        self.start = time.perf_counter()

    def add(self, name: str, text: str) -> None:
        self.outputs[name] = text

    def add_json(self, name: str, data) -> None:
        self.add(name, json.dumps(data, indent=2, allow_nan=True) + "\n")

    def finish(self, exit_code: int) -> None:
        for name, text in self.outputs.items():
            write_atomic(self.out / name, text)
        digests = {name: _digest(text.encode()) for name, text in sorted(self.outputs.items())}
        for extra in self.extra_files:
            digests[extra.relative_to(self.out).as_posix()] = _digest(extra.read_bytes())
        manifest = {
            "command": self.command, "config": self.cfg, "seed": self.cfg["seed"],
            "version": __version__, "threads": self.threads, "exit_code": exit_code,
            "inputs": {str(p): _digest(Path(p).read_bytes()) for p in self.inputs
                       if Path(p).is_file()},
            "outputs": dict(sorted(digests.items())),
            "wall_time_s": time.perf_counter() - self.start,
        }
        write_atomic(self.out / "manifest.json", json.dumps(manifest, indent=2) + "\n")


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_forward(cfg, run: Run) -> int:
    obs = _obstacle(cfg["shape"])
    sol = solve(obs, IncidentPlaneWave(cfg["k"], cfg["d_angle"]), _solver(cfg))
    run.add("pattern.csv", pattern_to_csv(far_field(sol, DirectionGrid(cfg["M"]))))
    _say(f"forward: residual {sol.residual:.2e} with {sol.config.n_sources} sources")
    return EXIT_OK


def cmd_oracle_disk(cfg, run: Run) -> int:
    bc = BoundaryCondition.from_spec(cfg["bc"])
    p = disk_far_field_series(float(cfg["radius"]), bc,
                              IncidentPlaneWave(cfg["k"], cfg["d_angle"]),
                              DirectionGrid(cfg["M"]), tuple(cfg["center"]))
    run.add("pattern.csv", pattern_to_csv(p))
    return EXIT_OK


def verify_identities(obs: Obstacle, motion: RigidMotion, k: float, d_angle: float,
                      grid: DirectionGrid, inc_grid: DirectionGrid, solver: MfsConfig,
                      flip_translation: bool = False) -> dict:
    """Relative errors of the translation and rotation identities for one shape.

    Translation: far field of the shape moved by z vs the translated base pattern.
    Rotation: far field of the shape rotated by theta vs rotate_predict of the
    base far-field matrix.
    """
    base = Obstacle(obs.base, RigidMotion(), obs.bc)
    wave = IncidentPlaneWave(k, d_angle)
    base_pattern = far_field(solve(base, wave, solver), grid)
    z = np.asarray(motion.z)
    moved = far_field(solve(Obstacle(obs.base, RigidMotion(0.0, motion.z), obs.bc),
                            wave, solver), grid)
    predicted = translate_pattern(base_pattern, -z if flip_translation else z)
    t_err = l2_distance(moved, predicted) / moved.norm()
    t_worst = float(grid.angles[np.argmax(np.abs(moved.samples - predicted.samples))])

    sols = solve_many(base, k, inc_grid.angles, solver)
    F = FarFieldMatrix(k, grid, inc_grid, far_field_matrix_columns(sols, grid))
    rotated = far_field(solve(Obstacle(obs.base, RigidMotion(motion.theta), obs.bc),
                              wave, solver), grid)
    r_pred = rotate_predict(F, motion.theta, d_angle)
    r_err = l2_distance(rotated, r_pred) / rotated.norm()
    r_worst = float(grid.angles[np.argmax(np.abs(rotated.samples - r_pred.samples))])
    return {"translation_error": t_err, "translation_worst_angle": t_worst,
            "rotation_error": r_err, "rotation_worst_angle": r_worst}


def cmd_verify_identities(cfg, run: Run) -> int:
    obs = _obstacle(cfg["shape"])
    motion = RigidMotion.from_spec(cfg["motion"])
    report = verify_identities(obs, motion, cfg["k"], cfg["d_angle"], DirectionGrid(cfg["M"]),
                               DirectionGrid(cfg["L"]), _solver(cfg),
                               bool(cfg["flip_translation"]))
    tol = float(cfg["tolerance"])
    report["tolerance"] = tol
    report["passed"] = report["translation_error"] < tol and report["rotation_error"] < tol
    run.add_json("identities.json", report)
    _say(f"translation relative error {report['translation_error']:.3e}")
    _say(f"rotation    relative error {report['rotation_error']:.3e}")
    if not report["passed"]:
        worst = (report["translation_worst_angle"] if report["translation_error"] >= tol
                 else report["rotation_worst_angle"])
        _say(f"FAIL: identity violated, worst observation angle {worst:.6f}")
        return EXIT_IDENTITY
    _say("PASS")
    return EXIT_OK


def _entries(cfg) -> list:
    if not cfg.get("entries"):
        return shipped_catalog()
    out = []
    for item in cfg["entries"]:
        spec = item["shape"]
        out.append(DictionaryEntry(item["id"], curve_from_spec(spec),
                                   BoundaryCondition.from_spec(item.get("bc", spec.get("bc", {})))))
    return out


def cmd_precompute_dict(cfg, run: Run) -> int:
    d = precompute(_entries(cfg), cfg["k"], DirectionGrid(cfg["M"]), DirectionGrid(cfg["L"]),
                   _solver(cfg), threads=run.threads)
    d.save(run.out / "dictionary")
    run.extra_files = sorted((run.out / "dictionary").iterdir())
    for e in d.entries:
        cert = d.provenance["entries"][e.id]
        _say(f"{e.id}: max residual {cert['max_residual']:.2e} "
             f"({cert['n_sources']} sources)")
    return EXIT_OK


def _dictionary(cfg, run: Run) -> ShapeDictionary:
    if not cfg.get("dictionary"):
        raise ConfigError("a dictionary directory is required (--dictionary)")
    path = Path(cfg["dictionary"])
    if not (path / "manifest.json").is_file():
        raise ConfigError(f"{path} is not a dictionary directory")
    run.inputs.append(path / "manifest.json")
    return ShapeDictionary.load(path)


def cmd_identify(cfg, run: Run) -> int:
    d = _dictionary(cfg, run)
    if not cfg.get("pattern"):
        raise ConfigError("a measured pattern CSV is required (--pattern)")
    run.inputs.append(Path(cfg["pattern"]))
    measured = read_pattern(cfg["pattern"])
    id_cfg = IdentifyConfig(location=cfg["location"], z=tuple(cfg["z"]),
                            box=tuple(tuple(b) for b in cfg["box"]),
                            not_in_dictionary=cfg["not_in_dictionary"],
                            ambiguity_margin=cfg["ambiguity_margin"], strict=False)
    result = identify(measured, d, id_cfg, threads=run.threads)
    run.add_json("result.json", result.to_json())
    _say(result_to_text(result))
    if result.flags["not_in_dictionary"]:
        _say("NotInDictionary")
        return EXIT_NOT_IN_DICT
    if result.flags["ambiguous"]:
        _say("Ambiguous")
        return EXIT_AMBIGUOUS
    return EXIT_OK


def cmd_separability(cfg, run: Run) -> int:
    d = _dictionary(cfg, run)
    rep = separability_check(d, int(cfg["trials"]), int(cfg["seed"]), float(cfg["floor"]))
    run.add_json("separability.json", rep.to_json())
    status = "PASS" if rep.passed else "FAIL"
    _say(f"separability {status}: min distance {rep.min_distance:.3e} "
         f"pair {rep.pair} d_angle {rep.d_angle:.6f} theta {rep.theta:.6f}")
    return EXIT_OK if rep.passed else EXIT_SEPARABILITY


GNUPLOT = """# gnuplot template
set logscale y
set xlabel "k"
set ylabel "relative far-field distance"
set datafile separator ","
plot "{csv}" every ::1 using 1:2 with lines title "delta(k)"
"""


def cmd_mc_distinguish(cfg, run: Run) -> int:
    exp = ExperimentConfig(cfg["k_min"], cfg["k_max"], int(cfg["trials"]), int(cfg["seed"]),
                           tuple(cfg["epsilons"]), DirectionGrid(cfg["M"]), _solver(cfg))
    rep = distinguish_experiment(_obstacle(cfg["obstacle_a"]), _obstacle(cfg["obstacle_b"]),
                                 exp, threads=run.threads)
    summary = rep.to_json()
    summary["stability"] = stability_profile(rep)
    run.add_json("summary.json", summary)
    run.add("trials.csv", rep.trials_csv())
    prof = ["epsilon,probability"] + [f"{e!r},{p!r}" for e, p in summary["stability"]["profile"]]
    run.add("profile.csv", "\n".join(prof) + "\n")
    _say(f"min delta {summary['min_delta']}, excluded {summary['excluded']}")
    floor = cfg.get("assert_min_delta")
    if floor is not None and not (summary["min_delta"] is not None
                                  and summary["min_delta"] > floor):
        _say(f"assertion failed: min delta not above {floor}")
        return EXIT_ASSERT
    return EXIT_OK


def cmd_k_scan(cfg, run: Run) -> int:
    ks = np.linspace(cfg["k_min"], cfg["k_max"], int(cfg["points"]))
    res = k_scan(_obstacle(cfg["obstacle_a"]), _obstacle(cfg["obstacle_b"]), cfg["d_angle"], ks,
                 DirectionGrid(cfg["M"]), _solver(cfg), threads=run.threads)
    run.add("kscan.csv", res.to_csv())
    run.add_json("kscan_annotations.json", res.annotations_json())
    run.add("kscan.gp", GNUPLOT.format(csv="kscan.csv"))
    valid = res.deltas[~res.excluded]
    min_delta = float(valid.min()) if valid.size else math.nan
    _say(f"min delta over grid {min_delta:.3e}; {len(res.annotations)} eigen-wavenumbers")
    floor = cfg.get("assert_min_delta")
    if floor is not None and not min_delta > floor:
        _say(f"assertion failed: min delta not above {floor}")
        return EXIT_ASSERT
    return EXIT_OK


def cmd_id_success(cfg, run: Run) -> int:
    if cfg.get("dictionary"):
        d = _dictionary(cfg, run)
    else:
        d = precompute(shipped_catalog(), cfg["k"], DirectionGrid(cfg["M"]),
                       DirectionGrid(cfg["L"]), _solver(cfg), threads=run.threads)
    sc = SuccessConfig(int(cfg["trials"]), int(cfg["seed"]), float(cfg["noise"]),
                       tuple(tuple(b) for b in cfg["box"]), bool(cfg["retry"]),
                       solver=_solver(cfg))
    rep = identification_success_rate(d, sc, threads=run.threads)
    run.add_json("summary.json", rep.to_json())
    run.add("trials.csv", rep.trials_csv())
    lo, hi = rep.interval
    _say(f"success rate {rep.rate:.3f} (95% CI {lo:.3f}-{hi:.3f}), "
         f"{len(rep.failures)} failures")
    floor = cfg.get("assert_min_rate")
    if floor is not None and rep.rate < floor:
        return EXIT_ASSERT
    return EXIT_OK


COMMANDS = {
    "forward": cmd_forward, "oracle-disk": cmd_oracle_disk,
    "verify-identities": cmd_verify_identities, "precompute-dict": cmd_precompute_dict,
    "identify": cmd_identify, "separability": cmd_separability,
    "mc-distinguish": cmd_mc_distinguish, "k-scan": cmd_k_scan, "id-success": cmd_id_success,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="farscatter", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config, shape spec, or a previous manifest.json")
        p.add_argument("--seed", type=int, help="master seed (default 0)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="workers; 0 = auto")
        p.add_argument("-v", "--verbose", action="store_true")
        keys = OVERRIDES[name]
        for key in ("k", "k_min", "k_max", "d_angle", "theta", "noise", "radius", "floor",
                    "assert_min_delta", "assert_min_rate"):
            if key in keys:
                p.add_argument("--" + key.replace("_", "-"), dest=key, type=float)
        for key in ("M", "L", "trials", "points"):
            if key in keys:
                p.add_argument("--" + key.replace("_", "-"), dest=key, type=int)
        if "z" in keys:
            p.add_argument("--z", type=float, nargs=2)
        for key in ("dictionary", "pattern", "location"):
            if key in keys:
                p.add_argument("--" + key, dest=key)
        for key in ("retry", "flip_translation"):
            if key in keys:
                p.add_argument("--" + key.replace("_", "-"), dest=key,
                               action="store_const", const=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    threads = args.threads if args.threads > 0 else (os.cpu_count() or 1)
    try:
        cfg, inputs = resolve_config(args.command, args)
    except (ConfigError, GeometryError) as exc:
        _say(f"config error: {exc}")
        return EXIT_CONFIG
    run = Run(args.command, cfg, inputs, Path(args.out), threads)
    try:
        code = COMMANDS[args.command](cfg, run)
    except (ConfigError, GeometryError, FarFieldError, KeyError, TypeError) as exc:
        _say(f"config error: {exc}")
        return EXIT_CONFIG
    except ScatterError as exc:
        _say(f"solver failure: {exc}")
        code = EXIT_SOLVER
    except NotInDictionary as exc:
        _say(str(exc))
        code = EXIT_NOT_IN_DICT
    except AmbiguousIdentification as exc:
        _say(str(exc))
        code = EXIT_AMBIGUOUS
    run.finish(code)
    return code


if __name__ == "__main__":
    sys.exit(main())
