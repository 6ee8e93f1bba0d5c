"""
Smooth manufactured solution on the unit square with K_m = 1:
p = sin(pi x) sin(pi y), u = -grad p, f = div u = 2 pi^2 sin(pi x) sin(pi y).
"""
import numpy as np


def manufactured_pressure(points: np.ndarray) -> np.ndarray:
    points = np.atleast_2d(points)
    return np.sin(np.pi * points[:, 0]) * np.sin(np.pi * points[:, 1])


def manufactured_velocity(points: np.ndarray) -> np.ndarray:
    points = np.atleast_2d(points)
    x, y = np.pi * points[:, 0], np.pi * points[:, 1]
    return -np.pi * np.column_stack([np.cos(x) * np.sin(y), np.sin(x) * np.cos(y)])


def manufactured_source(points: np.ndarray) -> np.ndarray:
    return 2.0 * np.pi ** 2 * manufactured_pressure(points)
