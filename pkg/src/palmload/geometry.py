"""
Poisson point processes and the typical cell under Palm probability.

Positions on the plane are complex numbers (km); on the line they are reals.
The base station of the typical cell sits at the origin and is never part of
a :class:`PointSet`.

Every ball ``B(z, |z|)`` passes through the origin, so in polar coordinates
centred at the origin its boundary is ``rho = 2 Re(z e^{-i phi})``. Unions of
such balls are therefore star-shaped about the origin, which is what makes
:func:`covered_area` exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from scipy.spatial import ConvexHull, QhullError

from .errors import CellTouchesWindow, DomainError

DEFAULT_WINDOW_COUNT = 3000.0


@dataclass(frozen=True)
class Window:
    """Simulation window centred on the origin.

    ``size`` is the disk radius (plane) or the interval half length (line).
    """

    dimension: str
    size: float

    def __post_init__(self):
        if self.dimension not in ("line", "plane"):
            raise DomainError(f"unknown dimension {self.dimension!r}")
        if not self.size > 0:
            raise DomainError("window size must be positive")

    @property
    def measure(self) -> float:
        if self.dimension == "plane":
            return math.pi * self.size**2
        return 2.0 * self.size

    @classmethod
    def for_count(cls, dimension: str, lam: float, count: float = DEFAULT_WINDOW_COUNT):
        """Window holding ``count`` points on average at density ``lam``."""
        if dimension == "plane":
            return cls("plane", math.sqrt(count / (math.pi * lam)))
        return cls("line", count / (2.0 * lam))


@dataclass
class PointSet:
    positions: np.ndarray
    marks: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions)
        self.marks = np.asarray(self.marks, dtype=float)
        if self.marks.shape[0] != self.positions.shape[0]:
            raise DomainError("one mark row per point is required")
        if np.any(self.positions == 0):
            raise DomainError("the origin is reserved for the typical base station")

    def __len__(self):
        return self.positions.shape[0]


@dataclass
class CellRealization:
    """One typical cell with the interfering point set.

    Plane: ``angles``/``radii`` hold the exact boundary distance on each ray
    and ``angle_weights`` the angular quadrature weights; ``vertices`` is the
    Voronoi polygon. Line: the cell is ``[-x_l / 2, x_r / 2]``.
    """

    dimension: str
    interferers: PointSet
    window: Window
    x_l: float = math.nan
    x_r: float = math.nan
    angles: Optional[np.ndarray] = None
    radii: Optional[np.ndarray] = None
    angle_weights: Optional[np.ndarray] = None
    vertices: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)

    @property
    def area(self) -> float:
        """Cell measure; on the plane the ray sum ``sum 1/2 r^2 dtheta``."""
        if self.dimension == "line":
            return 0.5 * (self.x_l + self.x_r)
        return float(0.5 * np.sum(self.radii**2 * self.angle_weights))

    @property
    def polygon_area(self) -> float:
        v = self.vertices
        return float(0.5 * np.sum((np.conj(v) * np.roll(v, -1)).imag))

    @property
    def max_radius(self) -> float:
        if self.dimension == "line":
            return 0.5 * max(self.x_l, self.x_r)
        return float(np.abs(self.vertices).max())

    def radius_at(self, theta) -> np.ndarray:
        """Exact boundary distance along arbitrary directions."""
        return boundary_radii(self.interferers.positions, np.atleast_1d(theta), cap=self.window.size)


def ray_angles(n: int) -> np.ndarray:
    return (np.arange(n) + 0.5) * (2 * math.pi / n)


def boundary_radii(points: np.ndarray, angles: np.ndarray, cap: float = math.inf) -> np.ndarray:
    """Distance from the origin to the Voronoi boundary along each angle.

    ``r(theta) = min |x|^2 / (2 x.u)`` over points with ``x.u > 0``;
    rays no point cuts are capped at ``cap``.
    """
    u = np.exp(1j * np.asarray(angles))
    pts = np.asarray(points, dtype=complex)
    proj = (pts[None, :] * np.conj(u)[:, None]).real
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(proj > 0, (np.abs(pts) ** 2)[None, :] / (2.0 * proj), np.inf)
    out = r.min(axis=1) if pts.size else np.full(u.shape, np.inf)
    return np.minimum(out, cap)


def _sample_marks(marks, rng, n):
    if marks is None:
        return np.ones(n)
    return np.asarray(marks.sample(rng, n), dtype=float)


def sample_ppp(lam: float, window: Window, rng: np.random.Generator, marks=None) -> PointSet:
    """Homogeneous PPP on the window; marks i.i.d. from ``marks.sample``."""
    if lam < 0:
        raise DomainError("lambda must be >= 0")
    n = rng.poisson(lam * window.measure) if lam > 0 else 0
    if window.dimension == "plane":
        rad = window.size * np.sqrt(rng.random(n))
        pos = rad * np.exp(2j * math.pi * rng.random(n))
    else:
        pos = window.size * (2.0 * rng.random(n) - 1.0)
    return PointSet(pos, _sample_marks(marks, rng, n))


@lru_cache(maxsize=512)
def _leggauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def _voronoi_polygon(pos: np.ndarray):
    """Neighbours and vertices of the origin's cell among ``pos``.

    The cell is ``{z : Re(z conj(p_n)) <= 1}`` with ``p_n = 2 x_n / |x_n|^2``;
    its edges are the convex hull vertices of the ``p_n``. Returns ``None``
    when the hull does not surround the origin (unbounded cell).
    """
    if pos.size < 3:
        return None
    p = 2.0 * pos / np.abs(pos) ** 2
    try:
        hull = ConvexHull(np.column_stack([p.real, p.imag]))
    except QhullError:
        return None
    if np.any(hull.equations[:, 2] >= 0):
        return None
    idx = hull.vertices  # counter-clockwise
    a, b = p[idx], np.roll(p[idx], -1)
    # intersection of Re(z conj a) = 1 and Re(z conj b) = 1
    det = a.real * b.imag - a.imag * b.real
    vx = (b.imag - a.imag) / det
    vy = (a.real - b.real) / det
    return idx, vx + 1j * vy


def _sector_rays(pos_sorted, nb, vertices, angular_nodes: int):
    """Gauss-Legendre rays inside each sector between consecutive vertices.

    Along a sector the boundary is the bisector of one neighbour, so
    ``r(theta)`` is smooth there and the angular rule converges quickly.
    """
    th = np.angle(vertices)
    start = np.roll(th, 1)
    width = np.mod(th - start, 2 * math.pi)
    counts = np.maximum(2, np.floor(angular_nodes * width / (2 * math.pi)).astype(int))
    while counts.sum() > angular_nodes and counts.max() > 2:
        counts[np.argmax(counts)] -= 1
    while counts.sum() < angular_nodes:
        counts[np.argmax(width / counts)] += 1
    angles, weights, radii = [], [], []
    for k, (s0, wd, m) in enumerate(zip(start, width, counts)):
        x, w = _leggauss(int(m))
        phi = s0 + 0.5 * wd * (x + 1.0)
        xn = pos_sorted[nb[k]]
        angles.append(phi)
        weights.append(0.5 * wd * w)
        radii.append(np.abs(xn) ** 2 / (2.0 * (xn * np.exp(-1j * phi)).real))
    angles = np.mod(np.concatenate(angles), 2 * math.pi)
    return angles, np.concatenate(weights), np.concatenate(radii)


def cell_from_points(points: PointSet, window: Window, angular_nodes: int = 256, strict: bool = True):
    """Typical plane cell of the origin given the other points.

    With ``strict`` the cell must be determined by points inside the window
    (``2 max |vertex| <= window radius``), otherwise
    :class:`CellTouchesWindow` is raised.
    """
    pos = points.positions
    order = np.argsort(np.abs(pos), kind="stable")
    pos_sorted = pos[order]
    d = np.abs(pos_sorted)
    k = min(16, d.size)
    while True:
        poly = _voronoi_polygon(pos_sorted[:k])
        if poly is not None:
            rmax = np.abs(poly[1]).max()
            if k >= d.size or d[k] > 2.0 * rmax:
                break
        elif k >= d.size:
            raise CellTouchesWindow("the points do not enclose the origin's cell")
        k = min(2 * k, d.size)
    if strict and 2.0 * rmax > window.size:
        raise CellTouchesWindow(f"cell radius {rmax:.3g} too large for window {window.size:.3g}")
    idx, vertices = poly
    # the edge of neighbour idx[i] runs from vertex i-1 to vertex i
    angles, weights, radii = _sector_rays(pos_sorted, idx, vertices, angular_nodes)
    return CellRealization(
        "plane",
        PointSet(pos_sorted, points.marks[order]),
        window,
        angles=angles,
        radii=radii,
        angle_weights=weights,
        vertices=vertices,
    )


def sample_typical_cell(
    lam: float,
    window: Window,
    rng: np.random.Generator,
    marks=None,
    angular_nodes: int = 256,
) -> CellRealization:
    """Typical cell under Palm probability.

    Line: the neighbours are at ``-x_l`` and ``x_r`` with ``x_l, x_r`` i.i.d.
    Exp(lam); the remaining points form a PPP outside ``[-x_l, x_r]``.
    Plane: Slivnyak construction, a PPP on the window plus the origin.
    """
    if window.dimension == "line":
        x_l, x_r = rng.exponential(1.0 / lam, size=2)
        if max(x_l, x_r) >= window.size:
            raise CellTouchesWindow("neighbour beyond the line window")
        n_left = rng.poisson(lam * (window.size - x_l))
        n_right = rng.poisson(lam * (window.size - x_r))
        left = -x_l - (window.size - x_l) * rng.random(n_left)
        right = x_r + (window.size - x_r) * rng.random(n_right)
        pos = np.concatenate([[-x_l, x_r], left, right])
        pts = PointSet(pos, _sample_marks(marks, rng, pos.size))
        return CellRealization("line", pts, window, x_l=float(x_l), x_r=float(x_r))
    pts = sample_ppp(lam, window, rng, marks)
    return cell_from_points(pts, window, angular_nodes)


# ---------------------------------------------------------------------------
# areas of balls through the origin


def lens_area(w: complex) -> float:
    """Area of the intersection of the unit disk and the disk of centre
    ``w - 1`` and radius ``|w|``."""
    w = complex(w)
    if w == 0:
        raise DomainError("lens_area is undefined at 0")
    r1, r2 = 1.0, abs(w)
    d = abs(w - 1.0)
    if d <= abs(r1 - r2):
        return math.pi * min(r1, r2) ** 2
    if d >= r1 + r2:
        return 0.0
    c1 = min(1.0, max(-1.0, (d * d + r1 * r1 - r2 * r2) / (2 * d * r1)))
    c2 = min(1.0, max(-1.0, (d * d + r2 * r2 - r1 * r1) / (2 * d * r2)))
    k = (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)
    return r1 * r1 * math.acos(c1) + r2 * r2 * math.acos(c2) - 0.5 * math.sqrt(max(k, 0.0))


def covered_area_batch(points: np.ndarray) -> np.ndarray:
    """Exact area of ``union_i B(z_i, |z_i|)`` for each row of ``points``.

    ``points`` has shape ``(batch, N)`` (complex). The union is star-shaped
    about the origin with boundary ``max_i 2 Re(z_i e^{-i phi})``; between
    consecutive breakpoints (zeros and pairwise crossings of those curves)
    one ball is on top and ``1/2 int rho^2 dphi`` has a closed form.
    """
    z = np.atleast_2d(np.asarray(points, dtype=complex))
    if np.any(z == 0):
        raise DomainError("points must be non-zero")
    nb, n = z.shape
    th = np.angle(z)
    brk = [th + math.pi / 2, th - math.pi / 2]
    if n > 1:
        i, j = np.triu_indices(n, 1)
        dif = np.angle(z[:, i] - z[:, j])
        brk += [dif + math.pi / 2, dif - math.pi / 2]
    b = np.mod(np.concatenate(brk, axis=1), 2 * math.pi)
    b = np.sort(np.concatenate([np.zeros((nb, 1)), b, np.full((nb, 1), 2 * math.pi)], axis=1), axis=1)
    lo, hi = b[:, :-1], b[:, 1:]
    mid = 0.5 * (lo + hi)
    rho = 2.0 * (z[:, None, :] * np.exp(-1j * mid)[:, :, None]).real
    top = np.argmax(rho, axis=2)
    zt = np.take_along_axis(z, top.reshape(nb, -1), axis=1).reshape(top.shape)
    alive = np.take_along_axis(rho, top[..., None], axis=2)[..., 0] > 0

    def prim(phi):
        x = phi - np.angle(zt)
        return np.abs(zt) ** 2 * (x + 0.5 * np.sin(2 * x))

    seg = np.where(alive, prim(hi) - prim(lo), 0.0)
    return seg.sum(axis=1)


def covered_area(points) -> float:
    """Lebesgue measure of ``union_i B(z_i, |z_i|)`` for 1..N plane points."""
    pts = np.atleast_1d(np.asarray(points, dtype=complex))
    if pts.size == 0:
        raise DomainError("at least one point is required")
    return float(covered_area_batch(pts[None, :])[0])


def covered_area_pair(z: complex, z2: complex) -> float:
    """``B_2`` through the lens identity ``pi(|z|^2+|z'|^2) - |z|^2 A(z'/z)``."""
    return math.pi * (abs(z) ** 2 + abs(z2) ** 2) - abs(z) ** 2 * lens_area(z2 / z)
