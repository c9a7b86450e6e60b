"""Acceptance gate: twelve end-to-end criteria at their stated tolerances.

Each test attaches a one-line verdict to its report; the summary hook in
conftest.py prints them in order after the run. Run on its own with

    python3 -m pytest tests/test_acceptance.py -v
"""
import csv
import io
import json
import math
import time

import mpmath
import numpy as np
import pytest

from farscatter.cli import main
from farscatter.farfield import (DirectionGrid, relative_distance, rotate_predict,
                                 translate_pattern)
from farscatter.geometry import (BoundaryCondition, Obstacle, RigidMotion, circle, ellipse,
                                 kite)
from farscatter.identify import DictionaryEntry, precompute, separability_check
from farscatter.mc import ExperimentConfig, distinguish_experiment
from farscatter.scatter import (IncidentPlaneWave, disk_far_field_series, far_field, gamma2,
                                near_field, solve, solve_many)
from farscatter.specfun import bessel_j, bessel_j_zero, bessel_jp, bessel_y, bessel_yp

N_BC = BoundaryCondition.neumann()
J01 = 2.404825557695773


def verdict(record_property, number, ok, text):
    line = f"[{number:2d}] {text}"
    record_property("criterion", number)
    record_property("line", line)
    print(("PASS " if ok else "FAIL ") + line)
    assert ok, line


def run_cli(args):
    start = time.perf_counter()
    code = main(args)
    return code, time.perf_counter() - start


@pytest.fixture(scope="module")
def cli_runs(tmp_path_factory):
    """Reference CLI runs (threads = 1) of every experiment, shared by several criteria."""
    root = tmp_path_factory.mktemp("acceptance")
    spec = root / "kite.json"
    spec.write_text(json.dumps({"family": "trig", "preset": "kite",
                                "motion": {"theta": 0.8, "z": [0.3, -0.2]},
                                "bc": {"type": "neumann"}}))
    runs = {
        "forward": ["forward", "--config", str(spec), "--k", "2", "--d-angle", "0.4"],
        "oracle-disk": ["oracle-disk", "--k", "5"],
        "verify-identities": ["verify-identities", "--theta", "0.9", "--z", "0.4", "-0.6"],
        "precompute-dict": ["precompute-dict"],
        "mc-distinguish": ["mc-distinguish"],
        "k-scan": ["k-scan"],
        "id-success": ["id-success"],
        "id-success-noise": ["id-success", "--noise", "0.01"],
    }
    codes, times = {}, {}
    for name, args in runs.items():
        codes[name], times[name] = run_cli(args + ["--out", str(root / name)])
    dictionary = str(root / "precompute-dict" / "dictionary")
    runs["identify"] = ["identify", "--dictionary", dictionary,
                        "--pattern", str(root / "forward" / "pattern.csv"), "--z", "0.3", "-0.2"]
    runs["separability"] = ["separability", "--dictionary", dictionary]
    for name in ("identify", "separability"):
        codes[name], times[name] = run_cli(runs[name] + ["--out", str(root / name)])
    return {"root": root, "args": runs, "codes": codes, "times": times}


def read_csv(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


# 1 -------------------------------------------------------------------------

def test_01_special_functions(record_property):
    mpmath.mp.dps = 30
    lo, hi = mpmath.mpf(2), mpmath.mpf(3)
    for _ in range(120):
        mid = (lo + hi) / 2
        if mpmath.besselj(0, lo) * mpmath.besselj(0, mid) <= 0:
            hi = mid
        else:
            lo = mid
    oracle = float((lo + hi) / 2)

    rng = np.random.default_rng(2024)
    n = rng.integers(0, 41, size=100)
    x = rng.uniform(0.1, 50.0, size=100)
    start = time.perf_counter()
    w = bessel_j(n, x) * bessel_yp(n, x) - bessel_jp(n, x) * bessel_y(n, x)
    zero = bessel_j_zero(0, 1)
    elapsed = time.perf_counter() - start
    residual = float(np.max(np.abs(w - 2 / (np.pi * x))))
    zero_err = abs(zero - oracle)
    ok = residual <= 1e-11 and zero_err <= 1e-12 and elapsed < 1.0
    verdict(record_property, 1, ok,
            f"special functions: Wronskian residual {residual:.1e} (<= 1e-11), "
            f"j_0,1 error {zero_err:.1e} (<= 1e-12), {elapsed:.3f} s (< 1 s)")


# 2 -------------------------------------------------------------------------

def test_02_disk_oracle(record_property):
    bcs = {"D": BoundaryCondition.dirichlet(), "N": N_BC,
           "I": BoundaryCondition.impedance(1 + 1j)}
    start = time.perf_counter()
    worst = 0.0
    for bc in bcs.values():
        for k in (1.0, 2.0, 5.0):
            w = IncidentPlaneWave(k, 0.7)
            mfs = far_field(solve(Obstacle(circle(1.0), bc=bc), w))
            worst = max(worst, relative_distance(mfs, disk_far_field_series(1.0, bc, w)))
    elapsed = time.perf_counter() - start
    verdict(record_property, 2, worst < 1e-8 and elapsed < 5.0,
            f"disk oracle D/N/I x k=1,2,5: worst relative L2 {worst:.1e} (< 1e-8), "
            f"{elapsed:.2f} s (< 5 s)")


# 3 -------------------------------------------------------------------------

def test_03_far_field_asymptotics(record_property):
    k = 2.0
    s = solve(Obstacle(kite(), bc=N_BC), IncidentPlaneWave(k, 0.5))
    radii = np.geomspace(10, 100, 16)
    slopes = []
    for phi in (0.3, 1.9, 4.0):
        xhat = np.array([math.cos(phi), math.sin(phi)])
        uinf = gamma2(k) * np.sum(s.coefficients * np.exp(-1j * k * s.sources @ xhat))
        rem = [abs(math.sqrt(r) * np.exp(-1j * k * r) * near_field(s, r * xhat) - uinf)
               for r in radii]
        slopes.append(np.polyfit(np.log(radii), np.log(rem), 1)[0])
    worst = max(abs(sl + 1) for sl in slopes)
    verdict(record_property, 3, worst <= 0.15,
            "far-field remainder slopes on kite "
            + ", ".join(f"{sl:.3f}" for sl in slopes) + " (-1 +- 0.15)")


# 4 -------------------------------------------------------------------------

def test_04_translation_identity(record_property):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(10):
        k = rng.uniform(0.5, 5.0)
        d = rng.uniform(0, 2 * np.pi)
        z = rng.uniform(-2, 2, size=2)
        w = IncidentPlaneWave(k, d)
        base = far_field(solve(Obstacle(kite(), bc=N_BC), w))
        moved = far_field(solve(Obstacle(kite(), RigidMotion(0.0, z), N_BC), w))
        worst = max(worst, relative_distance(moved, translate_pattern(base, z)))
    verdict(record_property, 4, worst < 1e-6,
            f"translation identity, kite, 10 random (k, d, z): worst {worst:.1e} (< 1e-6)")


# 5 -------------------------------------------------------------------------

def test_05_rotation_identity(record_property):
    rng = np.random.default_rng(5)
    grid = DirectionGrid(128)
    entry = [DictionaryEntry("ellipse", ellipse(1.0, 0.5), N_BC)]
    worst = 0.0
    for _ in range(10):
        k = rng.uniform(0.5, 5.0)
        d = rng.uniform(0, 2 * np.pi)
        theta = rng.uniform(0, 2 * np.pi)
        F = precompute(entry, k, grid, grid).matrices[0]
        direct = far_field(solve(Obstacle(ellipse(1.0, 0.5), RigidMotion(theta), N_BC),
                                 IncidentPlaneWave(k, d)), grid)
        worst = max(worst, relative_distance(direct, rotate_predict(F, theta, d)))
    verdict(record_property, 5, worst < 1e-5,
            f"rotation identity, ellipse, M = L = 128, 10 random (k, d, theta): "
            f"worst {worst:.1e} (< 1e-5)")


# 6 -------------------------------------------------------------------------

def test_06_reciprocity(record_property):
    k = 2.0
    rng = np.random.default_rng(6)
    xs, ds = rng.uniform(0, 2 * np.pi, 20), rng.uniform(0, 2 * np.pi, 20)
    obs = Obstacle(kite(), bc=N_BC)
    forward = solve_many(obs, k, ds)
    backward = solve_many(obs, k, xs + np.pi)

    def u_inf(sol, angle):
        xhat = np.array([math.cos(angle), math.sin(angle)])
        return gamma2(k) * np.sum(sol.coefficients * np.exp(-1j * k * sol.sources @ xhat))

    worst = 0.0
    for i in range(20):
        a = u_inf(forward[i], xs[i])             # u_inf(x_hat, d)
        b = u_inf(backward[i], ds[i] + np.pi)    # u_inf(-d, -x_hat)
        norm = far_field(forward[i]).norm()
        worst = max(worst, abs(a - b) / norm)
    verdict(record_property, 6, worst < 1e-6,
            f"reciprocity, kite, 20 random pairs: worst {worst:.1e} (< 1e-6)")


# 7 -------------------------------------------------------------------------

def test_07_identification(record_property, cli_runs):
    root = cli_runs["root"]
    clean = json.loads((root / "id-success" / "summary.json").read_text())
    noisy = json.loads((root / "id-success-noise" / "summary.json").read_text())
    rows = read_csv(root / "id-success" / "trials.csv")
    kite_err = max(float(r["theta_error"]) for r in rows if r["true_id"] == "kite")
    other_err = max((float(r["theta_error"]) for r in rows
                     if r["true_id"] != "kite" and r["theta_error"]), default=0.0)
    seconds = cli_runs["times"]["id-success"] + cli_runs["times"]["id-success-noise"]
    ok = (clean["trials"] == 100 and clean["rate"] == 1.0 and kite_err < 1e-3
          and noisy["rate"] >= 0.95 and seconds < 300)
    verdict(record_property, 7, ok,
            f"identification, k = 2 catalog, 100 trials: noiseless {clean['rate']:.2f} "
            f"(kite pose error {kite_err:.1e}, ellipse mod pi {other_err:.1e}), "
            f"1% noise {noisy['rate']:.2f} (>= 0.95), {seconds:.0f} s")


# 8 -------------------------------------------------------------------------

def test_08_distinguishability_dirichlet(record_property, cli_runs):
    summary = json.loads((cli_runs["root"] / "mc-distinguish" / "summary.json").read_text())
    cfg = json.loads((cli_runs["root"] / "mc-distinguish" / "manifest.json").read_text())["config"]
    p = {row["epsilon"]: row["probability"] for row in summary["cdf"]}[1e-3]
    seconds = cli_runs["times"]["mc-distinguish"]
    ok = (summary["included"] == 200 and cfg["obstacle_b"]["b"] == 0.9
          and p == 0.0 and summary["min_delta"] > 0 and seconds < 180)
    verdict(record_property, 8, ok,
            f"disk vs ellipse(1, 0.9), Dirichlet, N = 200: P(delta < 1e-3) = {p}, "
            f"min delta {summary['min_delta']:.3e}, {seconds:.1f} s (< 180 s)")


# 9 -------------------------------------------------------------------------

def test_09_disjoint_sound_hard_disks(record_property):
    a = Obstacle(circle(1.0), bc=N_BC)
    b = Obstacle(circle(1.0), RigidMotion(0.0, (3.0, 0.0)), N_BC)
    rep = distinguish_experiment(a, b, ExperimentConfig(trials=100, seed=9))
    g = rep.geometry
    ok = (rep.min_record is not None and rep.min_record.delta > 0 and rep.n_excluded == 0
          and abs(g["hausdorff"] - 3.0) <= 1e-2 and g["bound_holds"])
    verdict(record_property, 9, ok,
            f"disjoint sound-hard disks, N = 100: min delta {rep.min_record.delta:.3e}, "
            f"d_H = {g['hausdorff']:.4f} (3 +- 1e-2), bound {g['hausdorff']:.2f} <= "
            f"{g['bound']:.2f}")


# 10 ------------------------------------------------------------------------

def test_10_k_scan(record_property, cli_runs):
    root = cli_runs["root"] / "k-scan"
    rows = read_csv(root / "kscan.csv")
    deltas = np.array([float(r["delta"]) for r in rows])
    notes = json.loads((root / "kscan_annotations.json").read_text())
    annotated = [r["k"] for r in notes["eigen_wavenumbers"] if r["kind"] == "dirichlet"]
    has_j01 = any(abs(k - J01) < 1e-15 for k in annotated)
    ok = len(deltas) == 500 and bool(np.all(deltas > 0)) and has_j01
    verdict(record_property, 10, ok,
            f"k-scan, 500 points on (0.5, 3): min delta {deltas.min():.3e}, "
            f"annotated k includes {J01!r}: {has_j01}")


# 11 ------------------------------------------------------------------------

def test_11_separability(record_property, catalog_k2):
    rep = separability_check(catalog_k2, trials=50)
    verdict(record_property, 11, rep.passed and rep.min_distance > 1e-3,
            f"separability of shipped catalog, 50 trials: min distance "
            f"{rep.min_distance:.3f} for {rep.pair} (> 1e-3)")


# 12 ------------------------------------------------------------------------

def test_12_reproducibility(record_property, cli_runs):
    root = cli_runs["root"]
    top_level = "manifest.json"

    def outputs(directory):
        return {p.relative_to(directory).as_posix(): p.read_bytes()
                for p in sorted(directory.rglob("*"))
                if p.is_file() and p.relative_to(directory).as_posix() != top_level}

    mismatches = [f"{name}: exit {code}" for name, code in cli_runs["codes"].items() if code]
    for name, args in cli_runs["args"].items():
        ref = outputs(root / name)
        threaded, _ = run_cli(args + ["--threads", "2", "--out", str(root / (name + "-t2"))])
        replay, _ = run_cli([args[0], "--config", str(root / name / "manifest.json"),
                             "--out", str(root / (name + "-replay"))])
        if threaded != cli_runs["codes"][name] or replay != cli_runs["codes"][name]:
            mismatches.append(f"{name}: exit codes")
        for tag in ("-t2", "-replay"):
            if outputs(root / (name + tag)) != ref or not ref:
                mismatches.append(name + tag)
    verdict(record_property, 12, not mismatches,
            f"reproducibility: {len(cli_runs['args'])} experiments rerun with --threads 2 "
            f"and from their manifests, byte-identical outputs"
            + (f"; mismatches {mismatches}" if mismatches else ""))
