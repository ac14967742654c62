"""Point clouds, enclosing spheres, rotations and shuffle-extent estimates.

Points are plain numpy arrays: a point is shape ``(d,)`` and a cloud is
shape ``(n, d)`` with ``d`` in {2, 3}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)

INSIDE_TOL = 1e-9

HANDEDNESS = ("ccw", "cw")
COMPOSITIONS = ("xyz", "zyx")


def as_cloud(points) -> np.ndarray:
    """Validate and return an ``(n, d)`` float array with d in {2, 3}."""
    cloud = np.array(points, dtype=float, ndmin=2)
    if cloud.ndim != 2 or cloud.shape[0] < 1:
        raise ValueError("a point cloud needs at least one point")
    if cloud.shape[1] not in (2, 3):
        raise ValueError(f"points must be 2D or 3D, got dimension {cloud.shape[1]}")
    if not np.all(np.isfinite(cloud)):
        raise ValueError("point coordinates must be finite")
    return cloud


@dataclass(frozen=True, eq=False)
class BoundingSphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        center = np.array(self.center, dtype=float).reshape(-1)
        if self.radius < 0 or not math.isfinite(self.radius):
            raise ValueError("sphere radius must be finite and >= 0")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dimension(self) -> int:
        return len(self.center)

    def contains(self, points, tol: float = INSIDE_TOL) -> bool:
        dist = np.linalg.norm(np.atleast_2d(points) - self.center, axis=1)
        return bool(np.all(dist <= self.radius + tol))


@dataclass(frozen=True, eq=False)
class AxisBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.array(self.lower, dtype=float).reshape(-1)
        upper = np.array(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape:
            raise ValueError("box bounds must have equal dimension")
        if np.any(lower > upper):
            raise ValueError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    def contains(self, points, tol: float = INSIDE_TOL) -> bool:
        pts = np.atleast_2d(points)
        return bool(np.all(pts >= self.lower - tol) and np.all(pts <= self.upper + tol))


@dataclass(frozen=True)
class ExtentStats:
    """Coordinate extent ``m <= M`` and farthest-pair bound ``rho``."""

    m0: float
    M0: float
    rho: float = 0.0


# -- minimal enclosing ball -------------------------------------------------

def _circumball(boundary: list) -> tuple[np.ndarray, float]:
    """Smallest ball with all ``boundary`` points on its surface."""
    if not boundary:
        return None, -1.0
    p0 = boundary[0]
    if len(boundary) == 1:
        return p0.copy(), 0.0
    V = np.array([p - p0 for p in boundary[1:]])
    A = 2.0 * V @ V.T
    b = np.einsum("ij,ij->i", V, V)
    try:
        lam = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        lam = np.linalg.lstsq(A, b, rcond=None)[0]
    center = p0 + lam @ V
    radius = max(float(np.linalg.norm(p - center)) for p in boundary)
    return center, radius


def min_enclosing_sphere(points) -> BoundingSphere:
    """Exact minimal enclosing ball by Welzl's move-to-front scheme.

    Recursion depth is bounded by d + 1, so large clouds are fine.  The
    point order is processed as given, which keeps the result deterministic.
    """
    cloud = as_cloud(points)
    dim = cloud.shape[1]
    scale = max(1.0, float(np.max(np.abs(cloud))))
    tol = 1e-12 * scale
    pts = [p for p in cloud]

    def mtf(end: int, boundary: list):
        center, radius = _circumball(boundary)
        if len(boundary) == dim + 1:
            return center, radius
        i = 0
        while i < end:
            p = pts[i]
            if center is None or np.linalg.norm(p - center) > radius + tol:
                center, radius = mtf(i, boundary + [p])
                pts.insert(0, pts.pop(i))
            i += 1
        return center, radius

    center, radius = mtf(len(pts), [])
    # Final radius covers every input point exactly, absorbing solver noise.
    radius = float(np.max(np.linalg.norm(cloud - center, axis=1)))
    return BoundingSphere(center, radius)


# -- rotations --------------------------------------------------------------

def _cos_sin_degrees(angles) -> tuple[np.ndarray, np.ndarray]:
    """cos/sin of degree angles, exact at multiples of 90 degrees."""
    deg = np.mod(np.asarray(angles, dtype=float), 360.0)
    rad = np.deg2rad(deg)
    c, s = np.cos(rad), np.sin(rad)
    quarter = np.mod(deg, 90.0) == 0.0
    # mod can round a tiny negative angle up to exactly 360
    q = (deg[quarter] // 90.0).astype(int) % 4
    c[quarter] = np.array([1.0, 0.0, -1.0, 0.0])[q]
    s[quarter] = np.array([0.0, 1.0, 0.0, -1.0])[q]
    return c, s


def rotation_matrices(angles, handedness: str = "ccw", composition: str = "xyz") -> np.ndarray:
    """Batch of rotation matrices.

    ``angles`` has shape ``(n, 3)`` for 3D (about X, Y, Z) or ``(n, 1)`` for
    2D, in degrees.  ``"cw"`` negates every angle.  ``composition="xyz"``
    gives Rx @ Ry @ Rz acting on column vectors; ``"zyx"`` gives Rz @ Ry @ Rx,
    which is the same product read in the row-vector convention.
    """
    if handedness not in HANDEDNESS:
        raise ValueError(f"handedness must be one of {HANDEDNESS}")
    if composition not in COMPOSITIONS:
        raise ValueError(f"composition must be one of {COMPOSITIONS}")
    a = np.array(angles, dtype=float, ndmin=2)
    if handedness == "cw":
        a = -a
    n, k = a.shape
    c, s = _cos_sin_degrees(a)
    if k == 1:
        R = np.empty((n, 2, 2))
        R[:, 0, 0], R[:, 0, 1] = c[:, 0], -s[:, 0]
        R[:, 1, 0], R[:, 1, 1] = s[:, 0], c[:, 0]
        return R
    if k != 3:
        raise ValueError("need 1 angle (2D) or 3 angles (3D) per rotation")
    zero, one = np.zeros(n), np.ones(n)
    Rx = np.stack([one, zero, zero,
                   zero, c[:, 0], -s[:, 0],
                   zero, s[:, 0], c[:, 0]], axis=1).reshape(n, 3, 3)
    Ry = np.stack([c[:, 1], zero, s[:, 1],
                   zero, one, zero,
                   -s[:, 1], zero, c[:, 1]], axis=1).reshape(n, 3, 3)
    Rz = np.stack([c[:, 2], -s[:, 2], zero,
                   s[:, 2], c[:, 2], zero,
                   zero, zero, one], axis=1).reshape(n, 3, 3)
    if composition == "zyx":
        return Rz @ Ry @ Rx
    return Rx @ Ry @ Rz


def rotation_matrix(angles, handedness: str = "ccw", composition: str = "xyz") -> np.ndarray:
    """Single rotation: 3 angles -> 3x3, 1 angle -> 2x2 (degrees)."""
    a = np.atleast_1d(np.asarray(angles, dtype=float))
    if a.ndim != 1 or len(a) not in (1, 3):
        raise ValueError("need 1 angle (2D) or 3 angles (3D)")
    return rotation_matrices(a[None, :], handedness, composition)[0]


# -- shuffle extents --------------------------------------------------------

def extent_stats(center) -> ExtentStats:
    c = np.asarray(center, dtype=float).reshape(-1)
    return ExtentStats(float(c.min()), float(c.max()), 0.0)


def shuffle_extent_pure(box: AxisBox) -> ExtentStats:
    """Extent after shuffling the coordinates of points inside a 2D box.

    Every shuffled point lands in the square [m, M]^2, so no two of them are
    farther apart than its diagonal.
    """
    if len(box.lower) != 2:
        raise ValueError("shuffle_extent_pure expects a 2D box")
    m = float(box.lower.min())
    M = float(box.upper.max())
    return ExtentStats(m, M, SQRT2 * (M - m))


def shuffle_extent_mixed_2d(center, r: float) -> float:
    """Farthest-pair distance after shuffling a disc cloud with its anchors."""
    c = np.asarray(center, dtype=float).reshape(-1)
    if len(c) != 2:
        raise ValueError("shuffle_extent_mixed_2d expects a 2D center")
    if r <= 0:
        raise ValueError("radius must be positive")
    return 4.0 * r + SQRT2 * abs(c[0] - c[1])


def shuffle_extent_mixed_3d(center, r_p: float) -> ExtentStats:
    """Extent of the cube holding shuffled plaintext and anchor coordinates."""
    c = np.asarray(center, dtype=float).reshape(-1)
    if len(c) != 3:
        raise ValueError("shuffle_extent_mixed_3d expects a 3D center")
    if r_p <= 0:
        raise ValueError("radius must be positive")
    base = extent_stats(c)
    m = base.m0 - SQRT3 * r_p
    M = base.M0 + SQRT3 * r_p
    return ExtentStats(m, M, SQRT3 * (M - m))


def anchor_cube(center, r_p: float) -> AxisBox:
    """Axis box of half-side sqrt(d)*r_p around the center, holding cloud and anchors."""
    c = np.asarray(center, dtype=float).reshape(-1)
    half = math.sqrt(len(c)) * r_p
    return AxisBox(c - half, c + half)


def shuffled_box(center, r: float) -> AxisBox:
    """Box holding every shuffled coordinate, in 2D or 3D.

    Anchors lie within sqrt(d) r of the center, so every pooled coordinate
    falls in [min(center) - sqrt(d) r, max(center) + sqrt(d) r].
    """
    c = np.asarray(center, dtype=float).reshape(-1)
    half = math.sqrt(len(c)) * r
    d = len(c)
    return AxisBox(np.full(d, c.min() - half), np.full(d, c.max() + half))


def shuffled_cube(center, r_p: float) -> AxisBox:
    """Cube [m0 - sqrt(3) r_p, M0 + sqrt(3) r_p]^3 holding all shuffled points."""
    stats = shuffle_extent_mixed_3d(center, r_p)
    return AxisBox(np.full(3, stats.m0), np.full(3, stats.M0))


def shuffled_center(center, r_p: float) -> np.ndarray:
    """Center of the shuffled cube; the cloud's center moves here."""
    box = shuffled_cube(center, r_p)
    return (box.lower + box.upper) / 2.0
