"""Boundary curves, rigid motions and set distances.

Every curve is stored as a finite trigonometric series

    x(t) = sum_j  xc[j] cos(j t) + xs[j] sin(j t)
    y(t) = sum_j  yc[j] cos(j t) + ys[j] sin(j t)

so circles, ellipses and the catalog shapes share one code path. The series
can be evaluated at complex ``t``, which the scattering solver uses to place
its sources on the analytic continuation of the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

SIMPLICITY_SEGMENTS = 256
DISTANCE_SAMPLES = 1024
BOUNDARY_EPS = 1e-9


class GeometryError(ValueError):
    """Invalid curve, motion or query point."""


# ---------------------------------------------------------------------------
# Boundary conditions live here so that Obstacle can be built without a
# dependency on the solver; farscatter.scatter re-exports them.
# ---------------------------------------------------------------------------

BC_KINDS = ("dirichlet", "neumann", "impedance")


@dataclass(frozen=True)
class BoundaryCondition:
    """B(u) = u, du/dnu or du/dnu + lam*u on the boundary."""

    kind: str = "dirichlet"
    lam: complex = 0j

    def __post_init__(self):
        if self.kind not in BC_KINDS:
            raise GeometryError(f"unknown boundary condition {self.kind!r}")
        if self.kind == "impedance":
            if not complex(self.lam).imag > 0:
                raise GeometryError("impedance requires Im(lambda) > 0")
        object.__setattr__(self, "lam", complex(self.lam))

    @classmethod
    def dirichlet(cls):
        return cls("dirichlet")

    @classmethod
    def neumann(cls):
        return cls("neumann")

    @classmethod
    def impedance(cls, lam):
        return cls("impedance", complex(lam))

    def to_spec(self) -> dict:
        spec = {"type": self.kind}
        if self.kind == "impedance":
            spec["lambda"] = [self.lam.real, self.lam.imag]
        return spec

    @classmethod
    def from_spec(cls, spec: dict) -> "BoundaryCondition":
        kind = spec.get("type", "dirichlet")
        if kind == "impedance":
            lam = spec.get("lambda")
            if lam is None or len(lam) != 2:
                raise GeometryError("impedance needs 'lambda': [re, im]")
            return cls.impedance(complex(float(lam[0]), float(lam[1])))
        return cls(kind)


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------

def _coeffs(values, n):
    out = np.zeros(n)
    values = np.asarray(values, dtype=float)
    out[: len(values)] = values
    return out


@dataclass(frozen=True, eq=False)
class ParametricCurve:
    """Closed curve t -> (x(t), y(t)) on [0, 2pi) given by trig coefficients.

    Use the :func:`circle`, :func:`ellipse`, :func:`trig_curve` constructors
    (or the catalog shapes) rather than building coefficient arrays by hand.
    """

    family: str
    xc: np.ndarray
    xs: np.ndarray
    yc: np.ndarray
    ys: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        n = max(len(self.xc), len(self.xs), len(self.yc), len(self.ys), 2)
        for name in ("xc", "xs", "yc", "ys"):
            arr = _coeffs(getattr(self, name), n)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not all(np.isfinite(a).all() for a in (self.xc, self.xs, self.yc, self.ys)):
            raise GeometryError("curve coefficients must be finite")
        if signed_area(self) <= 0:
            raise GeometryError("curve must be counterclockwise (positive signed area)")
        if not is_simple(self):
            raise GeometryError("curve self-intersects")

    @property
    def degree(self) -> int:
        return len(self.xc) - 1

    def xy(self, t):
        """Coordinates at parameter(s) t; complex t gives the analytic continuation."""
        t = np.asarray(t)
        j = np.arange(self.degree + 1)
        c = np.cos(np.multiply.outer(t, j))
        s = np.sin(np.multiply.outer(t, j))
        return c @ self.xc + s @ self.xs, c @ self.yc + s @ self.ys

    def dxy(self, t):
        t = np.asarray(t)
        j = np.arange(self.degree + 1)
        c = np.cos(np.multiply.outer(t, j)) * j
        s = np.sin(np.multiply.outer(t, j)) * j
        return -s @ self.xc + c @ self.xs, -s @ self.yc + c @ self.ys

    def points(self, t) -> np.ndarray:
        x, y = self.xy(t)
        return np.stack([x, y], axis=-1)

    def complex_points(self, t) -> np.ndarray:
        """Z(t) = x(t) + i y(t); for complex t this is a point set in the plane."""
        x, y = self.xy(t)
        return x + 1j * y

    def sample(self, n: int) -> np.ndarray:
        return self.points(2 * np.pi * np.arange(n) / n)

    def to_spec(self) -> dict:
        if self.family in ("circle", "ellipse") or self.params.get("preset"):
            return {"family": self.family, **self.params}
        return {"family": "trig",
                "x_cos": self.xc.tolist(), "x_sin": self.xs[1:].tolist(),
                "y_cos": self.yc.tolist(), "y_sin": self.ys[1:].tolist()}


def circle(radius: float, center: Sequence[float] = (0.0, 0.0)) -> ParametricCurve:
    if not radius > 0:
        raise GeometryError("radius must be positive")
    params = {"radius": float(radius)}
    if tuple(center) != (0.0, 0.0):
        params["center"] = [float(center[0]), float(center[1])]
    return ParametricCurve("circle", [center[0], radius], [0, 0],
                           [center[1], 0], [0, radius], params)


def ellipse(a: float, b: float) -> ParametricCurve:
    if not (a > 0 and b > 0):
        raise GeometryError("semi-axes must be positive")
    return ParametricCurve("ellipse", [0, a], [0, 0], [0, 0], [0, b],
                           {"a": float(a), "b": float(b)})


def trig_curve(x_cos, x_sin, y_cos, y_sin, *, preset: str | None = None) -> ParametricCurve:
    """Curve from cosine coefficients (index 0 = constant) and sine
    coefficients (index 0 = first harmonic) of each coordinate."""
    params = {"preset": preset} if preset else {}
    return ParametricCurve("trig", list(x_cos), [0.0, *x_sin], list(y_cos),
                           [0.0, *y_sin], params)


def kite() -> ParametricCurve:
    """(cos t + 0.65 cos 2t - 0.65, 1.5 sin t): standard non-symmetric test shape."""
    return trig_curve([-0.65, 1.0, 0.65], [], [0.0], [1.5], preset="kite")


def rounded_triangle() -> ParametricCurve:
    """Polar curve r(t) = 1 + 0.2 cos 3t."""
    # r cos t = cos t + 0.1 cos 2t + 0.1 cos 4t ; r sin t = sin t - 0.1 sin 2t + 0.1 sin 4t
    return trig_curve([0, 1, 0.1, 0, 0.1], [], [0], [1, -0.1, 0, 0.1],
                      preset="rounded_triangle")


PRESETS = {"kite": kite, "rounded_triangle": rounded_triangle}


def curve_from_spec(spec: dict) -> ParametricCurve:
    family = spec.get("family")
    try:
        if family == "circle":
            return circle(float(spec["radius"]), tuple(spec.get("center", (0.0, 0.0))))
        if family == "ellipse":
            return ellipse(float(spec["a"]), float(spec["b"]))
        if family == "trig":
            if "preset" in spec:
                if spec["preset"] not in PRESETS:
                    raise GeometryError(f"unknown preset {spec['preset']!r}")
                return PRESETS[spec["preset"]]()
            return trig_curve(spec["x_cos"], spec.get("x_sin", []),
                              spec.get("y_cos", [0.0]), spec["y_sin"])
    except KeyError as exc:
        raise GeometryError(f"{family} curve is missing field {exc}") from None
    raise GeometryError(f"unknown curve family {family!r}")


def signed_area(c: ParametricCurve, n: int = 512) -> float:
    t = 2 * np.pi * np.arange(n) / n
    x, y = c.xy(t)
    dx, dy = c.dxy(t)
    return float(0.5 * np.mean(x * dy - y * dx) * 2 * np.pi)


def _segments_intersect(p, q):
    """Pairwise proper-intersection test between non-adjacent polyline segments."""
    a, b = p[:, None, :], q[:, None, :]
    c, d = p[None, :, :], q[None, :, :]

    def cross(o, u, v):
        return (u[..., 0] - o[..., 0]) * (v[..., 1] - o[..., 1]) - \
               (u[..., 1] - o[..., 1]) * (v[..., 0] - o[..., 0])

    d1 = cross(c, d, a)
    d2 = cross(c, d, b)
    d3 = cross(a, b, c)
    d4 = cross(a, b, d)
    return (d1 * d2 < 0) & (d3 * d4 < 0)


def is_simple(c: ParametricCurve, n: int = SIMPLICITY_SEGMENTS) -> bool:
    p = c.sample(n)
    q = np.roll(p, -1, axis=0)
    hits = _segments_intersect(p, q)
    idx = np.arange(n)
    gap = np.abs(idx[:, None] - idx[None, :])
    adjacent = (gap <= 1) | (gap == n - 1)
    return not np.any(hits & ~adjacent)


def eval_curve(c: ParametricCurve, t: float):
    """Point, unit tangent and outward unit normal at parameter t."""
    t = float(t) % (2 * np.pi)
    x, y = c.xy(t)
    dx, dy = c.dxy(t)
    speed = math.hypot(dx, dy)
    tangent = np.array([dx, dy]) / speed
    # counterclockwise orientation: outward normal is the tangent turned clockwise
    normal = np.array([tangent[1], -tangent[0]])
    return np.array([x, y]), tangent, normal


def normals(c: ParametricCurve, t) -> np.ndarray:
    dx, dy = c.dxy(t)
    speed = np.hypot(dx, dy)
    return np.stack([dy / speed, -dx / speed], axis=-1)


# ---------------------------------------------------------------------------
# Rigid motions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RigidMotion:
    """x -> U(theta) x + z."""

    theta: float = 0.0
    z: tuple = (0.0, 0.0)

    def __post_init__(self):
        theta = float(self.theta) % (2 * np.pi)
        z = tuple(float(v) for v in self.z)
        if len(z) != 2 or not all(math.isfinite(v) for v in (theta, *z)):
            raise GeometryError("motion needs finite theta and a 2-vector z")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "z", z)

    @property
    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, -s], [s, c]])

    def apply(self, points) -> np.ndarray:
        return np.asarray(points) @ self.matrix.T + np.asarray(self.z)

    def to_spec(self) -> dict:
        return {"theta": self.theta, "z": list(self.z)}

    @classmethod
    def from_spec(cls, spec: dict | None) -> "RigidMotion":
        if not spec:
            return cls()
        return cls(float(spec.get("theta", 0.0)), tuple(spec.get("z", (0.0, 0.0))))


def apply_motion(c: ParametricCurve, m: RigidMotion) -> ParametricCurve:
    """Curve whose points are U(theta) x + z for x on ``c``."""
    if m.theta == 0.0 and m.z == (0.0, 0.0):
        return c
    u = m.matrix
    xc = u[0, 0] * c.xc + u[0, 1] * c.yc
    xs = u[0, 0] * c.xs + u[0, 1] * c.ys
    yc = u[1, 0] * c.xc + u[1, 1] * c.yc
    ys = u[1, 0] * c.xs + u[1, 1] * c.ys
    xc = xc.copy(); yc = yc.copy()
    xc[0] += m.z[0]
    yc[0] += m.z[1]
    return ParametricCurve("trig", xc, xs, yc, ys)


@dataclass(frozen=True)
class Obstacle:
    """A base curve placed by a rigid motion, with its boundary condition."""

    base: ParametricCurve
    motion: RigidMotion = RigidMotion()
    bc: BoundaryCondition = BoundaryCondition()

    @property
    def boundary(self) -> ParametricCurve:
        return apply_motion(self.base, self.motion)

    def to_spec(self) -> dict:
        return {**self.base.to_spec(), "motion": self.motion.to_spec(),
                "bc": self.bc.to_spec()}

    @classmethod
    def from_spec(cls, spec: dict) -> "Obstacle":
        return cls(curve_from_spec(spec), RigidMotion.from_spec(spec.get("motion")),
                   BoundaryCondition.from_spec(spec.get("bc", {})))


# ---------------------------------------------------------------------------
# Containment and set distances
# ---------------------------------------------------------------------------

def _nearest_parameter(c: ParametricCurve, p, t0):
    """Newton iteration for the foot point of p on c, started at t0."""
    t = t0
    for _ in range(30):
        x, y = c.xy(t)
        dx, dy = c.dxy(t)
        h = 1e-5
        (dx2, dy2) = c.dxy(t + h)
        ddx, ddy = (dx2 - dx) / h, (dy2 - dy) / h
        rx, ry = x - p[0], y - p[1]
        g = rx * dx + ry * dy
        dg = dx * dx + dy * dy + rx * ddx + ry * ddy
        if dg <= 0:
            dg = dx * dx + dy * dy
        step = g / dg
        t = t - step
        if abs(step) < 1e-14:
            break
    return t


def contains(c: ParametricCurve, p) -> bool:
    """True iff p lies inside the region bounded by c.

    Points within BOUNDARY_EPS of the curve are rejected with GeometryError.
    """
    p = np.asarray(p, dtype=float)
    n = DISTANCE_SAMPLES
    t = 2 * np.pi * np.arange(n) / n
    pts = c.points(t)
    dist = np.hypot(pts[:, 0] - p[0], pts[:, 1] - p[1])
    i = int(np.argmin(dist))
    # polyline chords deviate from the curve by O(h^2); resolve close calls exactly
    if dist[i] < 0.05 * c_scale(pts):
        tf = _nearest_parameter(c, p, t[i])
        foot, _, nu = eval_curve(c, tf)
        gap = float(np.dot(p - foot, nu))
        if abs(gap) < BOUNDARY_EPS:
            raise GeometryError("query point lies on the boundary")
        return gap < 0
    rel = pts - p
    ang = np.arctan2(rel[:, 1], rel[:, 0])
    winding = np.sum(np.angle(np.exp(1j * (np.roll(ang, -1) - ang)))) / (2 * np.pi)
    return round(winding) == 1


def c_scale(pts) -> float:
    return float(np.ptp(pts, axis=0).max())


def contains_many(c: ParametricCurve, points) -> np.ndarray:
    """Vectorized winding-number containment (no near-boundary refinement)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    poly = c.sample(DISTANCE_SAMPLES)
    rel = poly[None, :, :] - points[:, None, :]
    ang = np.arctan2(rel[..., 1], rel[..., 0])
    dang = np.angle(np.exp(1j * (np.roll(ang, -1, axis=1) - ang)))
    return np.rint(dang.sum(axis=1) / (2 * np.pi)) == 1


def diameter(c: ParametricCurve, n: int = DISTANCE_SAMPLES) -> float:
    """Largest distance between boundary samples (a lower bound converging in n)."""
    return float(pdist(c.sample(n)).max())


def _directed(a_pts, b_curve, b_pts):
    tree = cKDTree(b_pts)
    dist, _ = tree.query(a_pts)
    inside = contains_many(b_curve, a_pts)
    return float(np.max(np.where(inside, 0.0, dist)))


def hausdorff_distance(c1: ParametricCurve, c2: ParametricCurve,
                       n: int = DISTANCE_SAMPLES) -> float:
    """Hausdorff distance between the closed regions bounded by c1 and c2.

    Approximated on n boundary samples of each curve; a sample lying inside
    the other region contributes zero to its directed term.
    """
    p1, p2 = c1.sample(n), c2.sample(n)
    return max(_directed(p1, c2, p2), _directed(p2, c1, p1))


def regions_intersect(c1: ParametricCurve, c2: ParametricCurve,
                      n: int = DISTANCE_SAMPLES) -> bool:
    """Whether the closed regions overlap, judged on boundary samples."""
    p1, p2 = c1.sample(n), c2.sample(n)
    if bool(contains_many(c2, p1).any() or contains_many(c1, p2).any()):
        return True
    return bool(cKDTree(p1).query(p2)[0].min() < 1e-9)


def rotational_symmetry_order(c: ParametricCurve, max_order: int = 12,
                              tol: float = 1e-9) -> int:
    """Largest m <= max_order with c invariant under rotation by 2pi/m about
    the origin; 0 if every order passes (a circle centred at the origin)."""
    pts = c.sample(DISTANCE_SAMPLES)
    tree = cKDTree(pts)
    scale = c_scale(pts)
    passed = []
    for m in range(2, max_order + 1):
        rotated = RigidMotion(2 * np.pi / m).apply(pts)
        # samples of a rotated curve fall between grid points; compare against the curve
        gap = tree.query(rotated)[0].max()
        if gap < 2 * np.pi / DISTANCE_SAMPLES * scale:
            exact = _max_curve_gap(c, rotated, tree)
            if exact < tol * max(scale, 1.0):
                passed.append(m)
    if max_order in passed and max_order - 1 in passed:
        return 0
    return max(passed, default=1)


def _max_curve_gap(c, pts, tree):
    n = DISTANCE_SAMPLES
    t = 2 * np.pi * np.arange(n) / n
    _, idx = tree.query(pts)
    worst = 0.0
    for p, i in zip(pts, idx):
        tf = _nearest_parameter(c, p, t[i])
        x, y = c.xy(tf)
        worst = max(worst, math.hypot(x - p[0], y - p[1]))
    return worst
