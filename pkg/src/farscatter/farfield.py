"""Far-field pattern containers, the L2(S^1) metric and rigid-motion transforms.

Angles are radians measured from the positive x axis. Patterns are sampled on
uniform grids, which makes the trapezoid rule spectrally exact for the L2
metric and lets rotations be evaluated by trigonometric interpolation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np


class FarFieldError(ValueError):
    """Mismatched metadata or malformed pattern data."""


class InterpolationError(FarFieldError):
    """Grid too coarse for the angular bandwidth of the data."""


class RefinementWarning(UserWarning):
    """Trailing Fourier modes carry more energy than the interpolation budget."""


TAIL_FRACTION = 0.1
TAIL_ENERGY_LIMIT = 1e-10


@dataclass(frozen=True)
class DirectionGrid:
    """M uniform angles 2*pi*m/M, m = 0..M-1."""

    M: int = 128

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 16 or self.M % 2:
            raise FarFieldError("grid size must be an even integer >= 16")
        object.__setattr__(self, "M", int(self.M))

    @property
    def angles(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.M) / self.M

    @property
    def directions(self) -> np.ndarray:
        a = self.angles
        return np.stack([np.cos(a), np.sin(a)], axis=-1)


def _frozen(a, dtype=complex):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FarFieldPattern:
    """Samples of u_inf(x_hat) for one incident plane wave."""

    k: float
    d_angle: float
    grid: DirectionGrid
    samples: np.ndarray

    def __post_init__(self):
        if not self.k > 0:
            raise FarFieldError("wavenumber must be positive")
        samples = _frozen(self.samples)
        if samples.shape != (self.grid.M,):
            raise FarFieldError(f"expected {self.grid.M} samples, got {samples.shape}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "k", float(self.k))
        object.__setattr__(self, "d_angle", float(self.d_angle) % (2 * np.pi))

    @property
    def direction(self) -> np.ndarray:
        return np.array([math.cos(self.d_angle), math.sin(self.d_angle)])

    def norm(self) -> float:
        return l2_norm(self)

    def with_samples(self, samples) -> "FarFieldPattern":
        return FarFieldPattern(self.k, self.d_angle, self.grid, samples)


@dataclass(frozen=True, eq=False)
class FarFieldMatrix:
    """Full-aperture data: column l is the pattern for incident angle 2*pi*l/L."""

    k: float
    obs_grid: DirectionGrid
    inc_grid: DirectionGrid
    samples: np.ndarray

    def __post_init__(self):
        if not self.k > 0:
            raise FarFieldError("wavenumber must be positive")
        samples = _frozen(self.samples)
        if samples.shape != (self.obs_grid.M, self.inc_grid.M):
            raise FarFieldError("matrix shape does not match its grids")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "k", float(self.k))

    def column(self, l: int) -> FarFieldPattern:
        return FarFieldPattern(self.k, self.inc_grid.angles[l], self.obs_grid,
                               self.samples[:, l])

    @cached_property
    def spectrum(self) -> np.ndarray:
        """2D Fourier coefficients (numpy FFT ordering), normalized by M*L."""
        return np.fft.fft2(self.samples) / self.samples.size

    def tail_energy(self) -> float:
        return _tail_energy_2d(self.spectrum)


# ---------------------------------------------------------------------------
# Metric
# ---------------------------------------------------------------------------

def _check_compatible(p: FarFieldPattern, q: FarFieldPattern):
    if p.grid != q.grid:
        raise FarFieldError("patterns live on different grids")
    if not math.isclose(p.k, q.k, rel_tol=1e-12):
        raise FarFieldError(f"wavenumbers differ: {p.k} vs {q.k}")
    gap = abs(math.remainder(p.d_angle - q.d_angle, 2 * np.pi))
    if gap > 1e-12:
        raise FarFieldError(f"incident directions differ: {p.d_angle} vs {q.d_angle}")


def l2_norm(p: FarFieldPattern) -> float:
    return math.sqrt(2 * np.pi / p.grid.M * float(np.sum(np.abs(p.samples) ** 2)))


def l2_distance(p: FarFieldPattern, q: FarFieldPattern) -> float:
    """Trapezoid-rule L2(S^1) distance between two patterns."""
    _check_compatible(p, q)
    diff = p.samples - q.samples
    return math.sqrt(2 * np.pi / p.grid.M * float(np.sum(np.abs(diff) ** 2)))


def relative_distance(p: FarFieldPattern, q: FarFieldPattern) -> float:
    """l2_distance normalized by the larger of the two norms (symmetric)."""
    scale = max(l2_norm(p), l2_norm(q))
    return l2_distance(p, q) / scale if scale > 0 else 0.0


# ---------------------------------------------------------------------------
# Translation
# ---------------------------------------------------------------------------

def translation_factor(k, obs_angles, d_angle, z) -> np.ndarray:
    """exp(-i k (x_hat - d) . z): maps the pattern of an obstacle to that of
    the same obstacle shifted by z."""
    obs_angles = np.asarray(obs_angles)
    zx, zy = float(z[0]), float(z[1])
    phase = k * ((np.cos(obs_angles) - math.cos(d_angle)) * zx
                 + (np.sin(obs_angles) - math.sin(d_angle)) * zy)
    return np.exp(-1j * phase)


def translate_pattern(p: FarFieldPattern, z) -> FarFieldPattern:
    """Pattern of the obstacle moved by z, from the pattern of the unmoved one."""
    factor = translation_factor(p.k, p.grid.angles, p.d_angle, z)
    return p.with_samples(factor * p.samples)


# ---------------------------------------------------------------------------
# Trigonometric interpolation
# ---------------------------------------------------------------------------

def _modes(n: int) -> np.ndarray:
    return np.fft.fftfreq(n, 1.0 / n).astype(int)


def trig_basis(n: int, angles) -> np.ndarray:
    """Rows evaluate the minimal-degree trig interpolant from FFT coefficients.

    The Nyquist mode n/2 is split evenly between +n/2 and -n/2 so that the
    interpolant of real data is real.
    """
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    modes = _modes(n)
    basis = np.exp(1j * np.multiply.outer(angles, modes))
    basis[:, n // 2] = np.cos(n // 2 * angles)
    return basis


def trig_interpolate(samples, angle):
    """Value at ``angle`` of the trig polynomial through uniform ``samples``."""
    samples = np.asarray(samples, dtype=complex)
    n = samples.shape[0]
    if n % 2:
        raise InterpolationError("trig_interpolate needs an even sample count")
    coeffs = np.fft.fft(samples) / n
    values = trig_basis(n, angle) @ coeffs
    return values[0] if np.ndim(angle) == 0 else values


def _tail_energy_1d(coeffs) -> float:
    n = len(coeffs)
    energy = np.abs(coeffs) ** 2
    tail = np.abs(_modes(n)) > (1 - TAIL_FRACTION) * n / 2
    total = energy.sum()
    return float(energy[tail].sum() / total) if total > 0 else 0.0


def _tail_energy_2d(spec) -> float:
    m, l = spec.shape
    energy = np.abs(spec) ** 2
    tail = (np.abs(_modes(m))[:, None] > (1 - TAIL_FRACTION) * m / 2) | \
           (np.abs(_modes(l))[None, :] > (1 - TAIL_FRACTION) * l / 2)
    total = energy.sum()
    return float(energy[tail].sum() / total) if total > 0 else 0.0


def check_bandwidth(F: FarFieldMatrix, *, strict: bool = False) -> float:
    """Fraction of energy in the top 10% of modes; warns (or raises) above 1e-10."""
    tail = F.tail_energy()
    if tail >= TAIL_ENERGY_LIMIT:
        msg = (f"far-field matrix tail energy {tail:.2e} exceeds {TAIL_ENERGY_LIMIT:.0e}; "
               "refine the direction grids")
        if strict:
            raise InterpolationError(msg)
        warnings.warn(msg, RefinementWarning, stacklevel=2)
    return tail


def evaluate_matrix(F: FarFieldMatrix, obs_angles, inc_angle) -> np.ndarray:
    """Trig-interpolated u_inf(obs_angles, inc_angle) from a far-field matrix."""
    inc = trig_basis(F.inc_grid.M, inc_angle)[0]
    col = F.spectrum @ inc
    return trig_basis(F.obs_grid.M, obs_angles) @ col


def rotate_predict(F: FarFieldMatrix, theta: float, d_angle: float,
                   grid: DirectionGrid | None = None) -> FarFieldPattern:
    """Pattern of the base obstacle rotated by theta, probed from direction d_angle.

    Uses u_inf(x_hat; U Omega, d) = u_inf(U^T x_hat; Omega, U^T d), i.e. both
    angles are shifted by -theta before interpolating F.
    """
    grid = grid or F.obs_grid
    samples = evaluate_matrix(F, grid.angles - theta, d_angle - theta)
    return FarFieldPattern(F.k, d_angle, grid, samples)


def rotate_matrix(F: FarFieldMatrix, theta: float) -> FarFieldMatrix:
    """Far-field matrix of the obstacle rotated by theta, on the same grids."""
    m, l = F.obs_grid.M, F.inc_grid.M
    b_obs = trig_basis(m, F.obs_grid.angles - theta)
    b_inc = trig_basis(l, F.inc_grid.angles - theta)
    return FarFieldMatrix(F.k, F.obs_grid, F.inc_grid, b_obs @ F.spectrum @ b_inc.T)


# ---------------------------------------------------------------------------
# Noise
# ---------------------------------------------------------------------------

def add_noise(p: FarFieldPattern, level: float, seed) -> FarFieldPattern:
    """Add circular complex Gaussian noise with per-sample standard deviation
    level * |p|_2 / sqrt(M) (|p|_2 the Euclidean norm of the samples), so the
    noise carries about ``level`` times the L2 norm of the pattern."""
    if level < 0:
        raise FarFieldError("noise level must be non-negative")
    if level == 0:
        return p
    rng = np.random.default_rng(seed)
    m = p.grid.M
    sigma = level * float(np.linalg.norm(p.samples)) / math.sqrt(m)
    noise = rng.normal(size=m) + 1j * rng.normal(size=m)
    return p.with_samples(p.samples + sigma / math.sqrt(2) * noise)


# ---------------------------------------------------------------------------
# CSV formats (17 significant digits; exact round trip)
# ---------------------------------------------------------------------------

def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _read_header(lines):
    header, rows = {}, []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            header[key.strip()] = value.strip()
        else:
            rows.append([float(v) for v in line.split(",")])
    return header, rows


def pattern_to_csv(p: FarFieldPattern) -> str:
    out = [f"# k={fmt(p.k)}", f"# d_angle={fmt(p.d_angle)}", f"# M={p.grid.M}"]
    for a, v in zip(p.grid.angles, p.samples):
        out.append(f"{fmt(a)},{fmt(v.real)},{fmt(v.imag)}")
    return "\n".join(out) + "\n"


def pattern_from_csv(text: str) -> FarFieldPattern:
    header, rows = _read_header(text.splitlines())
    try:
        k, d, m = float(header["k"]), float(header["d_angle"]), int(header["M"])
    except KeyError as exc:
        raise FarFieldError(f"pattern file lacks header {exc}") from None
    data = np.array(rows)
    if data.shape != (m, 3):
        raise FarFieldError(f"expected {m} rows of 3 columns, got {data.shape}")
    grid = DirectionGrid(m)
    if np.abs(data[:, 0] - grid.angles).max() > 1e-12:
        raise FarFieldError("angle column is not the uniform grid 2*pi*m/M")
    return FarFieldPattern(k, d, grid, data[:, 1] + 1j * data[:, 2])


def matrix_to_csv(F: FarFieldMatrix) -> str:
    out = [f"# k={fmt(F.k)}", f"# M={F.obs_grid.M}", f"# L={F.inc_grid.M}"]
    inc = F.inc_grid.angles
    for i, a in enumerate(F.obs_grid.angles):
        for j, b in enumerate(inc):
            v = F.samples[i, j]
            out.append(f"{fmt(a)},{fmt(b)},{fmt(v.real)},{fmt(v.imag)}")
    return "\n".join(out) + "\n"


def matrix_from_csv(text: str) -> FarFieldMatrix:
    header, rows = _read_header(text.splitlines())
    try:
        k, m, l = float(header["k"]), int(header["M"]), int(header["L"])
    except KeyError as exc:
        raise FarFieldError(f"matrix file lacks header {exc}") from None
    data = np.array(rows)
    if data.shape != (m * l, 4):
        raise FarFieldError(f"expected {m * l} rows of 4 columns, got {data.shape}")
    samples = (data[:, 2] + 1j * data[:, 3]).reshape(m, l)
    return FarFieldMatrix(k, DirectionGrid(m), DirectionGrid(l), samples)


def write_pattern(path, p: FarFieldPattern) -> None:
    Path(path).write_text(pattern_to_csv(p))


def read_pattern(path) -> FarFieldPattern:
    return pattern_from_csv(Path(path).read_text())


def write_matrix(path, F: FarFieldMatrix) -> None:
    Path(path).write_text(matrix_to_csv(F))


def read_matrix(path) -> FarFieldMatrix:
    return matrix_from_csv(Path(path).read_text())
