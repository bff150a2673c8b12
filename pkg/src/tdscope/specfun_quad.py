"""Special functions, sphere quadrature, and voxelization.

Spherical Bessel/Hankel functions, Legendre polynomials and orthonormal
spherical harmonics (real and complex bases), product quadrature rules on
spheres and spherical caps, and cell-center voxelization of scatterer shapes
onto a uniform cubic lattice.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import spherical_jn, spherical_yn, roots_legendre

__all__ = [
    "N_MAX",
    "SphereSurface",
    "ScattererGrid",
    "Ball",
    "Ellipsoid",
    "Union",
    "sph_bessel_j",
    "sph_hankel1",
    "legendre_p",
    "legendre_p_table",
    "real_spherical_harmonics",
    "complex_spherical_harmonics",
    "harmonics_table",
    "harmonic_index",
    "sphere_quadrature",
    "sphere_surface",
    "voxelize",
]

N_MAX = 60  # default order cap for series work; j_n tails are negligible far beyond kappa*R


def sph_bessel_j(n, x, n_max=N_MAX):
    """Spherical Bessel function j_n(x) for n >= 0, x >= 0."""
    n = np.asarray(n)
    if np.any(n < 0) or np.any(n > n_max):
        raise ValueError(f"order must lie in 0..{n_max}")
    return spherical_jn(n, np.asarray(x, dtype=float))


def sph_hankel1(n, x):
    """Spherical Hankel function of the first kind, h_n = j_n + i y_n; x > 0."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)) or np.any(x <= 0.0):
        raise ValueError("sph_hankel1 requires finite x > 0")
    n = np.asarray(n)
    # y_n overflows to -inf for n >> x; keep |h_n| = inf without a nan warning
    with np.errstate(invalid="ignore"):
        return spherical_jn(n, x) + 1j * spherical_yn(n, x)


def legendre_p(n, t):
    """Legendre polynomial P_n(t) on [-1, 1] by the three-term recurrence."""
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > 1.0 + 1e-12):
        raise ValueError("argument must lie in [-1, 1]")
    if n < 0:
        raise ValueError("order must be >= 0")
    p_prev = np.ones_like(t)
    if n == 0:
        return p_prev
    p = t.copy()
    for k in range(1, n):
        p, p_prev = ((2 * k + 1) * t * p - k * p_prev) / (k + 1), p
    return p


def legendre_p_table(n_max, t):
    """All P_n(t) for n = 0..n_max; shape (n_max+1,) + t.shape."""
    t = np.asarray(t, dtype=float)
    out = np.zeros((n_max + 1,) + t.shape)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = t
    for k in range(1, n_max):
        out[k + 1] = ((2 * k + 1) * t * out[k] - k * out[k - 1]) / (k + 1)
    return out


def _norm_assoc_legendre_table(n_max, ct, st):
    """Orthonormal associated Legendre P~_n^m(cos theta) for 0 <= m <= n <= n_max.

    Normalization is the spherical-harmonic one: Y_n^m = P~_n^m e^{i m phi},
    Condon-Shortley phase included.  Returns array (n_max+1, n_max+1, npts)
    indexed [n, m]; entries with m > n stay zero.  The recurrence operates on
    normalized values throughout, which keeps it stable to high order.
    """
    ct = np.asarray(ct, dtype=float)
    st = np.asarray(st, dtype=float)
    npts = ct.shape
    tab = np.zeros((n_max + 1, n_max + 1) + npts)
    tab[0, 0] = 1.0 / np.sqrt(4.0 * np.pi)
    # diagonal: P~_m^m = -sqrt((2m+1)/(2m)) * st * P~_{m-1}^{m-1}
    for m in range(1, n_max + 1):
        tab[m, m] = -np.sqrt((2 * m + 1.0) / (2.0 * m)) * st * tab[m - 1, m - 1]
    # off-diagonal upward in n
    for m in range(0, n_max):
        if m + 1 <= n_max:
            tab[m + 1, m] = np.sqrt(2 * m + 3.0) * ct * tab[m, m]
        for n in range(m + 2, n_max + 1):
            a = np.sqrt((4.0 * n * n - 1.0) / (n * n - m * m))
            b = np.sqrt(((n - 1.0) ** 2 - m * m) / (4.0 * (n - 1.0) ** 2 - 1.0))
            tab[n, m] = a * (ct * tab[n - 1, m] - b * tab[n - 2, m])
    return tab


def harmonic_index(n, m):
    """Flat index of (n, m) in the packed harmonic layout n*(n+1)+m."""
    return n * (n + 1) + m


def _dirs_to_angles(dirs):
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    r = np.linalg.norm(dirs, axis=1)
    if np.any(np.abs(r - 1.0) > 1e-10):
        raise ValueError("directions must be unit vectors")
    ct = np.clip(dirs[:, 2], -1.0, 1.0)
    st = np.sqrt(np.maximum(0.0, 1.0 - ct * ct))
    phi = np.arctan2(dirs[:, 1], dirs[:, 0])
    return ct, st, phi


def harmonics_table(n_max, dirs, kind="complex"):
    """Spherical harmonics Y_n^m(dir) for all n <= n_max, |m| <= n.

    Returns array ((n_max+1)^2, npts), rows packed as n*(n+1)+m.  kind
    'complex' gives the standard orthonormal basis with Condon-Shortley
    phase; 'real' gives the orthonormal real basis (cosine branch for m > 0,
    sine branch for m < 0).  Both satisfy the addition theorem
    sum_m Y_n^m(u) conj(Y_n^m(v)) = (2n+1)/(4 pi) P_n(u.v).
    """
    ct, st, phi = _dirs_to_angles(dirs)
    plm = _norm_assoc_legendre_table(n_max, ct, st)
    npts = ct.shape[0]
    dtype = complex if kind == "complex" else float
    out = np.zeros(((n_max + 1) ** 2, npts), dtype=dtype)
    for n in range(n_max + 1):
        out[harmonic_index(n, 0)] = plm[n, 0]
        for m in range(1, n + 1):
            if kind == "complex":
                e = np.exp(1j * m * phi)
                out[harmonic_index(n, m)] = plm[n, m] * e
                out[harmonic_index(n, -m)] = (-1.0) ** m * plm[n, m] * np.conj(e)
            elif kind == "real":
                s2 = np.sqrt(2.0) * (-1.0) ** m * plm[n, m]
                out[harmonic_index(n, m)] = s2 * np.cos(m * phi)
                out[harmonic_index(n, -m)] = s2 * np.sin(m * phi)
            else:
                raise ValueError("kind must be 'complex' or 'real'")
    return out


def complex_spherical_harmonics(n, m, dirs):
    """Y_n^m at unit direction(s), complex orthonormal basis."""
    if abs(m) > n:
        raise ValueError("|m| must not exceed n")
    return harmonics_table(n, dirs, kind="complex")[harmonic_index(n, m)]


def real_spherical_harmonics(n, m, dirs):
    """Y_n^m at unit direction(s), real orthonormal basis."""
    if abs(m) > n:
        raise ValueError("|m| must not exceed n")
    return harmonics_table(n, dirs, kind="real")[harmonic_index(n, m)]


def sphere_quadrature(order, aperture=None):
    """Product quadrature on the unit sphere or a spherical cap.

    Gauss-Legendre in cos(theta) on [cos(theta_max), 1] (full sphere when
    aperture is None) times a trapezoid rule in azimuth with 2*order equally
    spaced points.  Full-sphere rules integrate spherical polynomials of
    degree <= 2*order - 1 exactly.

    Returns (dirs, weights): dirs (npts, 3) unit vectors, weights summing to
    the cap area.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    theta_max = np.pi if aperture is None else float(aperture)
    if not 0.0 < theta_max <= np.pi:
        raise ValueError("aperture must lie in (0, pi]")
    xg, wg = roots_legendre(order)
    lo = np.cos(theta_max)
    ct = 0.5 * (xg + 1.0) * (1.0 - lo) + lo
    wc = wg * 0.5 * (1.0 - lo)
    n_az = 2 * order
    phi = 2.0 * np.pi * np.arange(n_az) / n_az
    w_az = 2.0 * np.pi / n_az
    st = np.sqrt(np.maximum(0.0, 1.0 - ct * ct))
    dirs = np.stack(
        [
            np.outer(st, np.cos(phi)).ravel(),
            np.outer(st, np.sin(phi)).ravel(),
            np.outer(ct, np.ones(n_az)).ravel(),
        ],
        axis=1,
    )
    weights = np.outer(wc, np.full(n_az, w_az)).ravel()
    return dirs, weights


@dataclass(frozen=True)
class SphereSurface:
    """Source or measurement sphere with an attached quadrature rule.

    nodes = center + radius * dirs; weights carry the surface measure
    (they sum to the area of the possibly truncated sphere).
    """

    center: np.ndarray
    radius: float
    dirs: np.ndarray
    weights: np.ndarray
    order: int
    aperture: float | None = None

    @property
    def nodes(self):
        return self.center[None, :] + self.radius * self.dirs

    @property
    def area(self):
        return float(np.sum(self.weights))


def sphere_surface(radius, order, center=(0.0, 0.0, 0.0), aperture=None):
    """Build a SphereSurface of given radius with a product rule of given order."""
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    dirs, w = sphere_quadrature(order, aperture=aperture)
    return SphereSurface(
        center=np.asarray(center, dtype=float),
        radius=float(radius),
        dirs=dirs,
        weights=w * radius**2,
        order=int(order),
        aperture=aperture,
    )


# ---------------------------------------------------------------------------
# shapes and voxelization


@dataclass(frozen=True)
class Ball:
    radius: float
    center: tuple = (0.0, 0.0, 0.0)

    def contains(self, pts):
        d = np.asarray(pts, dtype=float) - np.asarray(self.center)
        return np.einsum("...i,...i->...", d, d) <= self.radius**2

    @property
    def diameter(self):
        return 2.0 * self.radius

    @property
    def bbox(self):
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius

    @property
    def volume(self):
        return 4.0 * np.pi * self.radius**3 / 3.0


@dataclass(frozen=True)
class Ellipsoid:
    semi_axes: tuple
    center: tuple = (0.0, 0.0, 0.0)

    def contains(self, pts):
        d = (np.asarray(pts, dtype=float) - np.asarray(self.center)) / np.asarray(
            self.semi_axes
        )
        return np.einsum("...i,...i->...", d, d) <= 1.0

    @property
    def diameter(self):
        return 2.0 * max(self.semi_axes)

    @property
    def min_feature(self):
        return 2.0 * min(self.semi_axes)

    @property
    def bbox(self):
        c = np.asarray(self.center)
        s = np.asarray(self.semi_axes)
        return c - s, c + s

    @property
    def volume(self):
        a, b, c = self.semi_axes
        return 4.0 * np.pi * a * b * c / 3.0


@dataclass(frozen=True)
class Union:
    parts: tuple

    def contains(self, pts):
        inside = self.parts[0].contains(pts)
        for p in self.parts[1:]:
            inside = inside | p.contains(pts)
        return inside

    @property
    def diameter(self):
        los, his = zip(*(p.bbox for p in self.parts))
        lo = np.min(np.array(los), axis=0)
        hi = np.max(np.array(his), axis=0)
        return float(np.max(hi - lo))

    @property
    def min_feature(self):
        return min(getattr(p, "min_feature", p.diameter) for p in self.parts)

    @property
    def bbox(self):
        los, his = zip(*(p.bbox for p in self.parts))
        return np.min(np.array(los), axis=0), np.max(np.array(his), axis=0)

    @property
    def volume(self):
        # no overlap correction; fine for disjoint unions, which is all we build
        return sum(p.volume for p in self.parts)


@dataclass(frozen=True)
class ScattererGrid:
    """Voxelized scatterer: uniform cubic cells whose centers lie inside the shape."""

    centers: np.ndarray
    h: float
    shape: object
    contrast: object | None = None

    @property
    def n_cells(self):
        return self.centers.shape[0]

    @property
    def cell_volume(self):
        return self.h**3

    @property
    def volume(self):
        return self.n_cells * self.h**3

    @property
    def centroid(self):
        return self.centers.mean(axis=0)

    def with_contrast(self, contrast):
        return ScattererGrid(self.centers, self.h, self.shape, contrast)


def voxelize(shape, h=None, contrast=None):
    """Voxelize a shape onto a cubic lattice of spacing h (default diam/20).

    The lattice is centered on the shape's bounding-box midpoint with cell
    centers at half-integer offsets, so centered symmetric shapes voxelize to
    point sets symmetric about their center (exact zero centroid).  A cell
    belongs to the grid iff its center lies in the shape.
    """
    diam = shape.diameter
    feature = getattr(shape, "min_feature", diam)
    if h is None:
        h = diam / 20.0
    if not h < feature / 4.0 + 1e-12:
        raise ValueError("resolution too coarse: need h < min feature size / 4")
    lo, hi = shape.bbox
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    n_half = np.ceil(half / h).astype(int)
    axes = [mid[k] + h * (np.arange(-n_half[k], n_half[k]) + 0.5) for k in range(3)]
    xs, ys, zs = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([xs.ravel(), ys.ravel(), zs.ravel()], axis=1)
    inside = shape.contains(pts)
    centers = pts[inside]
    if centers.shape[0] == 0:
        raise ValueError("voxelization produced no cells (degenerate shape)")
    return ScattererGrid(centers=centers, h=float(h), shape=shape, contrast=contrast)
