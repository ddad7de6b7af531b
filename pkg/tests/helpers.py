"""Shared test helpers (importable: pytest puts tests/ on sys.path)."""

import math

import numpy as np

from citylayout.geometry import Polygon


def random_simple_polygon(rng: np.random.Generator, n: int = 10, radius: float = 10.0) -> Polygon:
    """Star-shaped n-gon around a random center: always simple.

    Angles are jittered from an even spacing so no angular gap exceeds pi
    (a gap beyond pi lets edges cross the far side of the center).
    """
    angles = 2 * math.pi * (np.arange(n) + rng.uniform(0.05, 0.9, n)) / n
    radii = rng.uniform(0.3 * radius, radius, n)
    cx, cy = rng.uniform(-50, 50, 2)
    pts = np.c_[cx + radii * np.cos(angles), cy + radii * np.sin(angles)]
    return Polygon(pts)


def rotate_scale_translate(
    pts,
    angle: float,
    scale: tuple[float, float],
    offset: tuple[float, float],
    mirror: bool = False,
) -> np.ndarray:
    out = np.asarray(pts, dtype=float).copy()
    if mirror:
        out[:, 0] = -out[:, 0]
    out = out * np.asarray(scale)
    c, s = math.cos(angle), math.sin(angle)
    out = out @ np.array([[c, s], [-s, c]])
    return out + np.asarray(offset)
