"""Distance-to-boundary estimates along the gradient ray.

Two ways of reducing a multi-class network to binary root problems:

* closest boundary (CB): one pairwise margin ``f_l - f_j`` per competitor,
  keeping the smallest root;
* fast outer boundary (FOB): a single root of ``f_l - max_{j != l} f_j``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from tubecert import diffnet, rootfind
from tubecert.diffnet import Network
from tubecert.errors import (
    ConfigError,
    DerivativeVanishedError,
    InvalidEstimateError,
    NoSignChange,
    PreconditionError,
    StationaryPointError,
)
from tubecert.rootfind import RootConfig, RootStatus
from tubecert.scalarize import OUTER_TIE_GAP, direction_from, make_outer_view, make_pair_view, ray


class Algorithm(str, enum.Enum):
    BISECTION = "bisection"
    NEWTON = "newton"


class Strategy(str, enum.Enum):
    CB = "cb"
    FOB = "fob"
    BINARY = "binary"


class Status(str, enum.Enum):
    CONVERGED = "converged"
    PARTIAL = "partial"
    FAILED = "failed"


@dataclass
class DistanceEstimate:
    t: float
    direction: np.ndarray | None
    competitor: int | None
    algorithm: Algorithm
    strategy: Strategy
    status: Status
    forward_passes: int = 0
    backward_passes: int = 0
    g_at_t: float = math.nan
    per_class: dict = field(default_factory=dict)
    tied_with: list = field(default_factory=list)
    # FOB only: the outer max was nearly tied at the root, where L has a kink
    near_tie: bool = False

    @property
    def ok(self) -> bool:
        return self.status is not Status.FAILED


def _solve_ray(view, x, algo: Algorithm, cfg: RootConfig, stop_above=None):
    """One minimal-root solve.  Returns ``(root_result, direction)`` or raises."""
    g0, grad = view.value_and_grad(x)
    nu = direction_from(g0, grad)
    section = ray(view, x, nu)
    if algo is Algorithm.BISECTION:
        return rootfind.bisect(section.g, cfg, stop_above=stop_above, g0=g0), nu
    if view.piecewise and not view.smooth:
        raise ConfigError("Newton is disabled on outer-margin views of ReLU networks")
    return rootfind.newton(section.g, section.dg, 0.0, cfg), nu


def binary_distance(view, x, algo=Algorithm.BISECTION, cfg: RootConfig = RootConfig()) -> DistanceEstimate:
    """Root search on a single scalar view (network view or analytic field)."""
    algo = Algorithm(algo)
    x = np.asarray(x, dtype=np.float64)
    f0, b0 = view.forward_passes, view.backward_passes
    est = DistanceEstimate(math.inf, None, None, algo, Strategy.BINARY, Status.FAILED)
    try:
        res, nu = _solve_ray(view, x, algo, cfg)
    except (NoSignChange, StationaryPointError, DerivativeVanishedError) as exc:
        est.per_class[None] = type(exc).__name__
    else:
        if res.converged:
            est.t, est.direction, est.g_at_t, est.status = res.t, nu, res.g_at_t, Status.CONVERGED
        else:
            est.per_class[None] = res.status.value
    est.forward_passes = view.forward_passes - f0
    est.backward_passes = view.backward_passes - b0
    return est


def _require_label(net: Network, x, l: int):
    k = diffnet.predicted_class(net, x)
    if k != l:
        raise PreconditionError(f"sample is classified as {k}, not {l}")


def closest_boundary(net: Network, x, l: int, algo=Algorithm.BISECTION,
                     cfg: RootConfig = RootConfig(), early_stop: bool = True) -> DistanceEstimate:
    """Smallest pairwise-margin root over all competitor classes.

    With bisection and ``early_stop`` the running minimum prunes later classes;
    a pruned class is recorded as ``"stalled"`` and is not a failure.  Classes
    whose ray never crosses are skipped; the estimate is then PARTIAL.  Equal
    roots go to the lowest class index, the others are listed in ``tied_with``.
    """
    algo = Algorithm(algo)
    x = np.asarray(x, dtype=np.float64)
    _require_label(net, x, l)
    est = DistanceEstimate(math.inf, None, None, algo, Strategy.CB, Status.FAILED)
    failed = 0
    for j in range(1, net.n_scores + 1):
        if j == l:
            continue
        view = make_pair_view(net, l, j)
        stop = est.t if (early_stop and algo is Algorithm.BISECTION and math.isfinite(est.t)) else None
        try:
            res, nu = _solve_ray(view, x, algo, cfg, stop_above=stop)
        except (NoSignChange, StationaryPointError, DerivativeVanishedError) as exc:
            est.per_class[j] = type(exc).__name__
            failed += 1
        else:
            est.per_class[j] = res.status.value
            if res.status is RootStatus.CONVERGED:
                if res.t < est.t:
                    est.t, est.direction, est.competitor, est.g_at_t = res.t, nu, j, res.g_at_t
                    est.tied_with = []
                elif res.t == est.t:
                    est.tied_with.append(j)
            elif res.status is not RootStatus.STALLED:
                failed += 1
        est.forward_passes += view.forward_passes
        est.backward_passes += view.backward_passes
    if est.competitor is not None:
        est.status = Status.PARTIAL if failed else Status.CONVERGED
    return est


def fast_outer_boundary(net: Network, x, l: int, algo=Algorithm.BISECTION,
                        cfg: RootConfig = RootConfig()) -> DistanceEstimate:
    """Single root search on the outer margin ``f_l - max_{j != l} f_j``."""
    algo = Algorithm(algo)
    x = np.asarray(x, dtype=np.float64)
    _require_label(net, x, l)
    view = make_outer_view(net, l)
    est = binary_distance(view, x, algo, cfg)
    est.strategy = Strategy.FOB
    if est.status is Status.CONVERGED and view.piecewise:
        est.near_tie = view.outer_gap(x + est.t * est.direction) < OUTER_TIE_GAP
    return est


def estimate(net: Network, x, l: int, strategy, algo, cfg: RootConfig = RootConfig()) -> DistanceEstimate:
    if Strategy(strategy) is Strategy.CB:
        return closest_boundary(net, x, l, algo, cfg)
    if Strategy(strategy) is Strategy.FOB:
        return fast_outer_boundary(net, x, l, algo, cfg)
    raise ConfigError(f"strategy {strategy!r} needs a view, use binary_distance")


def adversarial_point(est: DistanceEstimate, x) -> np.ndarray:
    """``x + t * direction`` for an estimate whose chosen root converged."""
    if est.status is Status.FAILED or est.direction is None:
        raise InvalidEstimateError("estimate did not converge")
    return np.asarray(x, dtype=np.float64) + est.t * est.direction
