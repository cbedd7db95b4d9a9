"""Closed-form scalar fields used as test classifiers.

Each field exposes the same surface as a network view (``value``, ``grad``,
``hvp``) so root finders, strategies and the sigma bounds run on them
unchanged.  Positive values are the "correct" side.
"""

from __future__ import annotations

import numpy as np

from tubecert.diffnet import fd_hvp


class AnalyticField:
    name = "field"
    smooth = True
    piecewise = False

    def __init__(self):
        self.forward_passes = 0
        self.backward_passes = 0

    def value(self, x) -> float:
        self.forward_passes += 1
        return float(self._f(np.asarray(x, dtype=np.float64)))

    def grad(self, x) -> np.ndarray:
        self.forward_passes += 1
        self.backward_passes += 1
        return self._g(np.asarray(x, dtype=np.float64))

    def value_and_grad(self, x):
        x = np.asarray(x, dtype=np.float64)
        self.forward_passes += 1
        self.backward_passes += 1
        return float(self._f(x)), self._g(x)

    def hvp(self, x, v) -> np.ndarray:
        return fd_hvp(self._g, x, v)

    def vectorized(self, X: np.ndarray) -> np.ndarray:
        """Evaluate on an array of points with coordinates along the last axis."""
        return np.apply_along_axis(self._f, -1, X)


class Affine(AnalyticField):
    """``w.x + b``."""

    name = "affine"

    def __init__(self, w, b):
        super().__init__()
        self.w = np.asarray(w, dtype=np.float64)
        self.b = float(b)

    def _f(self, x):
        return self.w @ x + self.b

    def _g(self, x):
        return self.w.copy()

    def hvp(self, x, v):
        return np.zeros_like(self.w)

    def vectorized(self, X):
        return X @ self.w + self.b


class Circle(AnalyticField):
    """``||x||^2 - r^2``: positive outside the circle of radius ``r``."""

    name = "circle"

    def __init__(self, r=1.0):
        super().__init__()
        self.r = float(r)

    def _f(self, x):
        return x @ x - self.r ** 2

    def _g(self, x):
        return 2.0 * x

    def vectorized(self, X):
        return np.sum(X * X, axis=-1) - self.r ** 2


class Parabola(AnalyticField):
    """``y - x^2``."""

    name = "parabola"

    def _f(self, p):
        return p[1] - p[0] ** 2

    def _g(self, p):
        return np.array([-2.0 * p[0], 1.0])

    def vectorized(self, X):
        return X[..., 1] - X[..., 0] ** 2


class SineStress(AnalyticField):
    """``y - sin(x^2)``: the non-compact boundary with non-unique projections."""

    name = "sine_stress"

    def _f(self, p):
        return p[1] - np.sin(p[0] ** 2)

    def _g(self, p):
        return np.array([-2.0 * p[0] * np.cos(p[0] ** 2), 1.0])

    def vectorized(self, X):
        return X[..., 1] - np.sin(X[..., 0] ** 2)


REGISTRY = {cls.name: cls for cls in (Affine, Circle, Parabola, SineStress)}
