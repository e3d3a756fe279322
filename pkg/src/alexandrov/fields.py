"""Scalar fields sampled on uniform grids with an in-domain mask."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import ndimage

from .errors import TooCoarse


@dataclass(frozen=True, eq=False)
class GridField:
    """Samples ``values[i, j]`` at ``origin + (i*h, j*h)``.

    ``mask[i, j]`` marks in-domain points.  Boundary points are in-domain
    points with a 4-neighbour outside the domain or off the array.
    """

    values: np.ndarray
    h: float
    origin: tuple[float, float] = (0.0, 0.0)
    mask: np.ndarray | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("grid values must be two-dimensional")
        if min(v.shape) < 5:
            raise TooCoarse(f"grid {v.shape} is coarser than 5 x 5")
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        m = np.ones(v.shape, bool) if self.mask is None else np.array(self.mask, dtype=bool)
        if m.shape != v.shape:
            raise ValueError("mask shape differs from values")
        _, ncomp = ndimage.label(m)
        if ncomp != 1:
            raise ValueError("domain mask must be a single connected region")
        v = np.where(m, v, 0.0)
        v.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "mask", m)
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def ny(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_function(cls, func: Callable, nx: int, ny: int, h: float, origin=(0.0, 0.0), mask=None) -> "GridField":
        x = origin[0] + h * np.arange(nx)
        y = origin[1] + h * np.arange(ny)
        X, Y = np.meshgrid(x, y, indexing="ij")
        vals = np.broadcast_to(np.asarray(func(X, Y), float), X.shape)
        if callable(mask):
            mask = mask(X, Y)
        return cls(vals, h, origin, mask)

    @classmethod
    def box(cls, func: Callable, n: int, xlim=(0.0, 1.0), ylim=None, mask=None) -> "GridField":
        """``n`` points across the x-interval, endpoints included; same spacing in y."""
        ylim = xlim if ylim is None else ylim
        h = (xlim[1] - xlim[0]) / (n - 1)
        ny = int(round((ylim[1] - ylim[0]) / h)) + 1
        return cls.from_function(func, n, ny, h, (xlim[0], ylim[0]), mask)

    def with_values(self, values, mask=None) -> "GridField":
        return GridField(values, self.h, self.origin, self.mask if mask is None else mask)

    def coords(self):
        x = self.origin[0] + self.h * np.arange(self.nx)
        y = self.origin[1] + self.h * np.arange(self.ny)
        return np.meshgrid(x, y, indexing="ij")

    @property
    def points(self) -> np.ndarray:
        X, Y = self.coords()
        return np.stack([X, Y], axis=-1)

    def _padded_mask(self) -> np.ndarray:
        return np.pad(self.mask, 1, constant_values=False)

    @property
    def boundary_mask(self) -> np.ndarray:
        pm = self._padded_mask()
        full = pm[:-2, 1:-1] & pm[2:, 1:-1] & pm[1:-1, :-2] & pm[1:-1, 2:]
        return self.mask & ~full

    @property
    def interior_mask(self) -> np.ndarray:
        return self.mask & ~self.boundary_mask

    def weights(self) -> np.ndarray:
        """Dual-cell quadrature weights: ``h^2`` times the share of the four
        surrounding grid squares lying entirely in the domain."""
        pm = self._padded_mask()
        sq = pm[:-1, :-1] & pm[1:, :-1] & pm[:-1, 1:] & pm[1:, 1:]  # (nx+1, ny+1) squares
        share = (sq[:-1, :-1].astype(float) + sq[1:, :-1] + sq[:-1, 1:] + sq[1:, 1:]) / 4.0
        return np.where(self.mask, share * self.h**2, 0.0)

    def integral(self, values=None) -> float:
        v = self.values if values is None else np.asarray(values)
        return float((v * self.weights())[self.mask].sum())

    def sample(self, points) -> np.ndarray:
        """Bilinear interpolation at arbitrary points inside the grid box."""
        p = np.asarray(points, float).reshape(-1, 2)
        fx = (p[:, 0] - self.origin[0]) / self.h
        fy = (p[:, 1] - self.origin[1]) / self.h
        i0 = np.clip(np.floor(fx).astype(int), 0, self.nx - 2)
        j0 = np.clip(np.floor(fy).astype(int), 0, self.ny - 2)
        tx = np.clip(fx - i0, 0.0, 1.0)
        ty = np.clip(fy - j0, 0.0, 1.0)
        v = self.values
        return ((1 - tx) * (1 - ty) * v[i0, j0] + tx * (1 - ty) * v[i0 + 1, j0]
                + (1 - tx) * ty * v[i0, j0 + 1] + tx * ty * v[i0 + 1, j0 + 1])

    def nearest_index(self, point) -> tuple[int, int]:
        i = int(round((point[0] - self.origin[0]) / self.h))
        j = int(round((point[1] - self.origin[1]) / self.h))
        return min(max(i, 0), self.nx - 1), min(max(j, 0), self.ny - 1)


def lshape_mask(X, Y, xlim=(0.0, 1.0), tol=1e-12):
    """Square minus its open upper-right quadrant."""
    m = 0.5 * (xlim[0] + xlim[1])
    return ~((X > m + tol) & (Y > m + tol))


def disk_mask(X, Y, center=(0.0, 0.0), radius=1.0, tol=1e-12):
    return (X - center[0]) ** 2 + (Y - center[1]) ** 2 <= radius**2 + tol
