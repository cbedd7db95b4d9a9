"""Minimal-positive-root solvers for ``g(t)`` with ``g(0) > 0``."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from tubecert.errors import BadBracketError, ConfigError, DerivativeVanishedError, NoSignChange

DERIVATIVE_FLOOR = 1e-12


class RootStatus(enum.Enum):
    CONVERGED = "converged"
    NO_SIGN_CHANGE = "no_sign_change"
    MAX_ITER = "max_iter_exceeded"
    STALLED = "stalled"


@dataclass(frozen=True)
class RootConfig:
    """Solver settings.  ``t_up`` is the initial upper end ``b`` of the search
    interval; :meth:`for_data` sets it to the diameter of the data's bounding box."""

    tol: float = 5e-5
    max_iter: int = 60
    max_attempts: int = 10
    t_up: float | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")
        if self.max_attempts < 0:
            raise ConfigError("max_attempts must be >= 0")
        if self.t_up is not None and not self.t_up > 0:
            raise ConfigError("t_up must be positive")

    def for_data(self, X) -> "RootConfig":
        X = np.asarray(X, dtype=np.float64)
        diam = float(np.linalg.norm(X.max(axis=0) - X.min(axis=0)))
        return RootConfig(self.tol, self.max_iter, self.max_attempts, diam)

    def upper(self) -> float:
        if self.t_up is None:
            raise ConfigError("RootConfig.t_up is unset; use for_data() or pass t_up")
        return self.t_up


@dataclass
class RootResult:
    t: float
    g_at_t: float
    iterations: int
    status: RootStatus
    bracket: tuple[float, float] | None = None
    evaluations: int = 0
    # Newton may land on a root that is not the smallest one
    minimal_guaranteed: bool = True

    @property
    def converged(self) -> bool:
        return self.status is RootStatus.CONVERGED


def _armijo(g, b: float, R: int):
    """Return ``(b_tilde, g(b_tilde), evaluations)``; probes every ``b / 2**i``, i <= R."""
    best = None
    for i in range(R + 1):
        t = b * 2.0 ** (-i)
        val = g(t)
        if val < 0:
            best = (t, val)
    if best is None:
        raise NoSignChange(f"g >= 0 at every probe b*2^-i, i=0..{R} (b={b})")
    return best[0], best[1], R + 1


def armijo_upper(g, b: float, R: int) -> float:
    """Smallest probe ``b * 2**-i`` (``i = 0..R``) at which ``g`` is negative."""
    return _armijo(g, b, R)[0]


def bisect(g, cfg: RootConfig, stop_above: float | None = None, g0: float | None = None) -> RootResult:
    """Bisection on ``[0, b_tilde]`` keeping ``g(low) > 0 >= g(up)``.

    Converges when ``-tol < g(up) <= 0``.  With ``stop_above`` set, gives up
    (status STALLED) as soon as the lower end exceeds it: the root cannot beat
    a minimum already found elsewhere.
    """
    if g0 is None:
        g0 = g(0.0)
    if not g0 > 0:
        raise BadBracketError(f"need g(0) > 0, got {g0}")
    up, o_up, evals = _armijo(g, cfg.upper(), cfg.max_attempts)
    evals += 1
    low = 0.0
    if -cfg.tol < o_up <= 0:
        return RootResult(up, o_up, 0, RootStatus.CONVERGED, (low, up), evals)
    for step in range(1, cfg.max_iter + 1):
        mid = 0.5 * (low + up)
        out = g(mid)
        evals += 1
        if out > 0:
            low = mid
        else:
            up, o_up = mid, out
        if stop_above is not None and low > stop_above:
            return RootResult(up, o_up, step, RootStatus.STALLED, (low, up), evals)
        if -cfg.tol < o_up <= 0:
            return RootResult(up, o_up, step, RootStatus.CONVERGED, (low, up), evals)
    return RootResult(up, o_up, cfg.max_iter, RootStatus.MAX_ITER, (low, up), evals)


def newton(g, dg, t0: float = 0.0, cfg: RootConfig = RootConfig()) -> RootResult:
    """Plain Newton iteration clamped to ``t >= 0``.  The root found is not
    guaranteed to be the smallest positive one."""
    t = float(t0)
    evals = 0
    for it in range(cfg.max_iter + 1):
        val = g(t)
        evals += 1
        if abs(val) < cfg.tol:
            return RootResult(t, val, it, RootStatus.CONVERGED, None, evals, minimal_guaranteed=False)
        if it == cfg.max_iter:
            break
        d = dg(t)
        evals += 1
        if abs(d) < DERIVATIVE_FLOOR or not math.isfinite(d):
            raise DerivativeVanishedError(f"g'({t}) = {d}")
        t = max(t - val / d, 0.0)
    return RootResult(t, val, cfg.max_iter, RootStatus.MAX_ITER, None, evals, minimal_guaranteed=False)
