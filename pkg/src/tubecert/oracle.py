"""Ground-truth boundary distances.

``iterative_penalty`` minimises ``||delta|| + c * max(0, L(x + delta))`` with
Adam for a sequence of penalties ``c`` chosen by bisection, where ``L`` is the
outer margin of the label.  ``grid_projection`` is a brute-force check for 2D
analytic fields.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from tubecert import _backend, diffnet
from tubecert.diffnet import Network
from tubecert.errors import BoundaryNotFound, ConfigError, OracleFailure, PreconditionError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PenaltyConfig:
    tol: float = 5e-5
    max_gd_iters: int = 10_000
    c_low: float = 0.0
    c_up: float = 100.0
    c_bisections: int = 12
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    warm_start: bool = False
    # "shrink": a failed trial that stalled inside the class region (final
    # margin above stall_fraction * L(x)) raises c_low; every other trial,
    # converged or hovering at the boundary, lowers c_up.
    # "grow": converged trials raise c_low, all others lower c_up.
    c_search: str = "shrink"
    stall_fraction: float = 0.1

    def __post_init__(self):
        if not (0 <= self.c_low < self.c_up):
            raise ConfigError("need 0 <= c_low < c_up")
        if self.tol <= 0 or self.max_gd_iters < 1 or self.c_bisections < 1 or self.lr <= 0:
            raise ConfigError("penalty settings must be positive")
        if not 0 < self.stall_fraction < 1:
            raise ConfigError("stall_fraction must lie in (0, 1)")
        if self.c_search not in ("shrink", "grow"):
            raise ConfigError(f"unknown c_search {self.c_search!r}")


@dataclass
class PenaltyTrial:
    c: float
    converged: bool
    norm: float
    iterations: int
    margin: float


@dataclass
class GroundTruthDistance:
    d: float
    point: np.ndarray
    c_final: float
    converged: bool
    inner_iters: int
    trials: list


def _field_descent(field, x, c, cfg, delta0):
    """Same iteration as the network kernel, for any object with ``value_and_grad``."""
    delta = np.array(delta0, dtype=np.float64)
    m = np.zeros_like(delta)
    v = np.zeros_like(delta)
    b1t = b2t = 1.0
    it = 0
    while True:
        value, grad = field.value_and_grad(x + delta)
        if -cfg.tol < value <= 0.0:
            return delta, True, it, value
        if it >= cfg.max_gd_iters:
            return delta, False, it, value
        g = c * grad if value > 0.0 else np.zeros_like(delta)
        nrm = float(np.sqrt(delta @ delta))
        if nrm > 0.0:
            g = g + delta / nrm
        it += 1
        b1t *= cfg.beta1
        b2t *= cfg.beta2
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g
        delta = delta - cfg.lr * (m / (1.0 - b1t)) / (np.sqrt(v / (1.0 - b2t)) + cfg.eps)


def penalty_descent(model, x, l: int, c: float, cfg: PenaltyConfig = PenaltyConfig(),
                    delta0=None):
    """One Adam run for a fixed penalty; returns ``(delta, converged, iters, margin)``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if delta0 is None:
        delta0 = np.zeros_like(x)
    if not isinstance(model, Network):
        return _field_descent(model, x, float(c), cfg, delta0)
    return _backend.kernels.penalty_adam(
        *model.packed(), x, l - 1, float(c), cfg.tol, cfg.max_gd_iters,
        cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, np.ascontiguousarray(delta0, dtype=np.float64))


def iterative_penalty(model, x, l: int | None = None,
                      cfg: PenaltyConfig = PenaltyConfig()) -> GroundTruthDistance:
    """Smallest converged ``||delta||`` over the bisection sequence of penalties.

    ``model`` is a network (``L`` is the outer margin of label ``l``) or a
    scalar field with positive value at ``x`` (``l`` unused).  Raises
    :class:`OracleFailure` when no penalty trial reaches the band
    ``-tol < L(x + delta) <= 0``.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if isinstance(model, Network):
        k = diffnet.predicted_class(model, x)
        if k != l:
            raise PreconditionError(f"sample is classified as {k}, not {l}")
        start = float(diffnet.scalar(model, x, diffnet.ScalarSelector.outer(l)))
    else:
        start = float(model.value(x))
        if not start > 0:
            raise PreconditionError("field must be positive at x")
    lo, up = cfg.c_low, cfg.c_up
    best = None
    trials = []
    total = 0
    delta0 = np.zeros_like(x)
    for _ in range(cfg.c_bisections):
        c = 0.5 * (lo + up)
        delta, ok, iters, margin = penalty_descent(model, x, l, c, cfg, delta0)
        total += iters
        norm = float(np.linalg.norm(delta))
        trials.append(PenaltyTrial(c, ok, norm, iters, margin))
        if ok and (best is None or norm < best[0]):
            best = (norm, delta, c)
        if cfg.c_search == "shrink":
            too_small = not ok and margin > cfg.stall_fraction * start
        else:
            too_small = ok
        if too_small:
            lo = c
        else:
            up = c
        if cfg.warm_start and ok:
            delta0 = delta
    if best is None:
        raise OracleFailure(f"no penalty in ({cfg.c_low}, {cfg.c_up}) reached the boundary band")
    norm, delta, c = best
    return GroundTruthDistance(norm, x + delta, c, True, total, trials)


# -- brute-force projection for 2D fields -------------------------------------

def _refine(field, a: np.ndarray, b: np.ndarray, fa: np.ndarray, iters: int = 50) -> np.ndarray:
    """Vectorised bisection on segments ``[a, b]`` whose end values differ in sign."""
    lo, hi = a.copy(), b.copy()
    sgn_lo = np.sign(fa)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = field.vectorized(mid)
        same = np.sign(fm) == sgn_lo
        lo[same] = mid[same]
        hi[~same] = mid[~same]
    return 0.5 * (lo + hi)


def grid_projection(field, x, resolution: int = 2001, box=None, half_width: float = 3.0) -> float:
    """Distance from ``x`` to the zero set of a 2D field, by grid scan.

    Sign changes along grid edges are refined by bisection; the result is the
    smallest distance to a recovered boundary point.  ``box`` is
    ``((xmin, xmax), (ymin, ymax))``, by default a square of ``half_width``
    around ``x``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (2,):
        raise ValueError("grid projection works on 2D points")
    if box is None:
        box = ((x[0] - half_width, x[0] + half_width), (x[1] - half_width, x[1] + half_width))
    xs = np.linspace(box[0][0], box[0][1], resolution)
    ys = np.linspace(box[1][0], box[1][1], resolution)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    P = np.stack([X, Y], axis=-1)
    F = field.vectorized(P)
    exact = P[F == 0]
    pts = [exact]
    for axis in (0, 1):
        fa = np.take(F, range(resolution - 1), axis=axis)
        fb = np.take(F, range(1, resolution), axis=axis)
        mask = fa * fb < 0
        if mask.any():
            a = np.take(P, range(resolution - 1), axis=axis)[mask]
            b = np.take(P, range(1, resolution), axis=axis)[mask]
            pts.append(_refine(field, a, b, fa[mask]))
    pts = np.concatenate(pts)
    if pts.shape[0] == 0:
        raise BoundaryNotFound("no sign change inside the search box")
    return float(np.min(np.linalg.norm(pts - x, axis=1)))


def linearized_distance(field, x) -> float:
    """First-order distance estimate ``|f(x)| / ||grad f(x)||``."""
    value, g = field.value_and_grad(x)
    return abs(value) / float(np.linalg.norm(g)) if np.any(g) else math.inf
