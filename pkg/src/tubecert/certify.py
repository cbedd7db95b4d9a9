"""Tubular-neighbourhood certificates.

Inside a tube of radius ``sigma(rho)`` around the boundary the ray root ``t``
and the true distance ``d`` satisfy ``d <= t <= rho * d`` for any
``rho = 2 cos(alpha)`` in ``(sqrt 2, 2]``.  This module computes the
constants, the empirical radius ``sigma_hat``, sampled curvature bounds on the
radius, per-sample verdicts, and the bounded-attack verification.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from tubecert.errors import EmptyDatasetError, RegionSamplingError

SQRT2 = math.sqrt(2.0)
HESSIAN_FLOOR = 1e-12


@dataclass(frozen=True)
class RhoAlpha:
    rho: float
    alpha: float
    beta: float

    @classmethod
    def from_rho(cls, rho: float) -> "RhoAlpha":
        if not SQRT2 - 1e-12 <= rho <= 2.0:
            raise ValueError(f"rho must lie in (sqrt 2, 2], got {rho}")
        alpha = math.acos(min(rho / 2.0, 1.0))
        return cls(rho, alpha, math.cos(2.0 * alpha))

    @classmethod
    def from_alpha(cls, alpha: float) -> "RhoAlpha":
        if not 0 <= abs(alpha) <= math.pi / 4:
            raise ValueError("alpha must lie in [-pi/4, pi/4]")
        return cls(2.0 * math.cos(alpha), alpha, math.cos(2.0 * alpha))


def _rho_star_residual(a: float) -> float:
    return 0.5 * (1.0 - math.cos(a)) - 2.0 * math.cos(2.0 * a)


def rho_star() -> tuple[float, float]:
    """``(alpha*, rho*)`` where the two curvature bounds balance:
    ``(1 - cos a) / 2 = 2 cos 2a`` on ``(0, pi/4)``."""
    lo, hi = 0.0, math.pi / 4  # residual is -2 at 0 and positive at pi/4
    while hi - lo > 1e-14:
        mid = 0.5 * (lo + hi)
        if _rho_star_residual(mid) < 0:
            lo = mid
        else:
            hi = mid
    alpha = 0.5 * (lo + hi)
    return alpha, 2.0 * math.cos(alpha)


def parse_rho(value) -> float:
    """Accept a number or one of ``"sqrt2"``, ``"rho_star"``."""
    if isinstance(value, str):
        key = value.strip().lower()
        if key in ("sqrt2", "sqrt(2)", "√2"):
            return SQRT2
        if key in ("rho_star", "rho*", "ρ*"):
            return rho_star()[1]
        return float(key)
    return float(value)


# -- empirical radius -------------------------------------------------------

def violators(pairs, rho: float) -> list[int]:
    """Indices of ``(d, t)`` pairs with ``t / d > rho``."""
    return [i for i, (d, t) in enumerate(pairs) if t > rho * d]


def sigma_hat(pairs, rho: float) -> float:
    """Smallest ``d`` among pairs violating ``t <= rho * d``; ``inf`` if none."""
    pairs = list(pairs)
    if not pairs:
        raise EmptyDatasetError("sigma_hat needs at least one (d, t) pair")
    for d, t in pairs:
        if not d > 0 or t < 0:
            raise ValueError(f"need d > 0 and t >= 0, got d={d}, t={t}")
    bad = violators(pairs, rho)
    return min((pairs[i][0] for i in bad), default=math.inf)


@dataclass
class SigmaReport:
    rho: float
    sigma_hat: float
    sigma_tilde_1: float = math.inf
    sigma_tilde_2: float = math.inf
    sample_count: int = 0
    violators: list = field(default_factory=list)


# -- sampled curvature bounds ------------------------------------------------

def hessian_norm(view, x, iters: int = 20, tol: float = 1e-6, seed: int = 0) -> float:
    """Operator norm of the Hessian at ``x`` by power iteration on Hessian-vector products."""
    x = np.asarray(x, dtype=np.float64)
    v = np.random.default_rng(seed).standard_normal(x.shape[0])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        hv = view.hvp(x, v)
        nrm = float(np.linalg.norm(hv))
        if nrm < HESSIAN_FLOOR:
            return nrm
        v = hv / nrm
        if abs(nrm - est) <= tol * max(nrm, 1.0):
            return nrm
        est = nrm
    return est


@dataclass
class PointSampler:
    """Explicit point sets: ``omega`` samples the tube, ``boundary`` the zero set."""

    omega_points: np.ndarray
    boundary_points: np.ndarray

    def omega(self):
        return np.atleast_2d(self.omega_points)

    def boundary(self):
        return np.atleast_2d(self.boundary_points)


def ray_sampler(xs, directions, ts, fractions=tuple(k / 10 for k in range(1, 10))) -> PointSampler:
    """Tube points ``x + u * t * nu`` (and ``x``) plus the ray roots ``x + t * nu``."""
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    nus = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    ts = np.asarray(ts, dtype=np.float64)
    fr = np.concatenate([[0.0], np.asarray(fractions, dtype=np.float64)])
    omega = (xs[:, None, :] + fr[None, :, None] * ts[:, None, None] * nus[:, None, :]).reshape(-1, xs.shape[1])
    boundary = xs + ts[:, None] * nus
    return PointSampler(omega, boundary)


@dataclass
class CurvatureStats:
    grad_inf_omega: float
    hess_sup_omega: float
    grad_inf_boundary: float
    hess_sup_boundary: float


def curvature_stats(view, sampler, power_iters: int = 20, power_tol: float = 1e-6) -> CurvatureStats:
    omega = sampler.omega()
    bnd = sampler.boundary()
    if omega.size == 0 or bnd.size == 0:
        raise RegionSamplingError("sampler returned no points")
    g_om = min(float(np.linalg.norm(view.grad(p))) for p in omega)
    g_b = min(float(np.linalg.norm(view.grad(p))) for p in bnd)
    h_b = max(hessian_norm(view, p, power_iters, power_tol) for p in bnd)
    # the closure of the tube contains the boundary
    h_om = max(h_b, max(hessian_norm(view, p, power_iters, power_tol) for p in omega))
    return CurvatureStats(g_om, h_om, g_b, h_b)


def bounds_from_stats(stats: CurvatureStats, alpha: float) -> tuple[float, float]:
    beta = math.cos(2.0 * alpha)
    s1 = math.inf if stats.hess_sup_omega < HESSIAN_FLOOR else \
        0.5 * stats.grad_inf_omega / stats.hess_sup_omega * (1.0 - math.cos(alpha))
    s2 = math.inf if stats.hess_sup_boundary < HESSIAN_FLOOR else \
        2.0 * beta * stats.grad_inf_boundary / stats.hess_sup_boundary
    return s1, s2


def sigma_lower_bounds(view, sampler, alpha: float, power_iters: int = 20,
                       power_tol: float = 1e-6) -> tuple[float, float]:
    """Sampled ``(sigma_tilde_1, sigma_tilde_2)``.

    ``sigma_tilde_1 = (1 - cos alpha) / 2 * inf_tube ||grad|| / sup_tube ||hess||`` and
    ``sigma_tilde_2 = 2 cos(2 alpha) * inf_B ||grad|| / sup_B ||hess||``, with the
    inf/sup taken over the sampled points, so these are estimates rather than
    certified bounds.  Both are ``inf`` when the Hessian vanishes.
    """
    return bounds_from_stats(curvature_stats(view, sampler, power_iters, power_tol), alpha)


# -- verdicts -----------------------------------------------------------------

class Verdict(str, enum.Enum):
    NOT_ROBUST = "not_robust"
    ROBUST = "robust"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class RobustnessVerdict:
    verdict: Verdict
    eps: float
    t: float
    rho: float
    note: str = "robust only certified when x lies in the tube of radius sigma(rho)"


def verdict(t: float, eps: float, rho: float) -> RobustnessVerdict:
    if t < eps:
        v = Verdict.NOT_ROBUST
    elif t > rho * eps:
        v = Verdict.ROBUST
    else:
        v = Verdict.INCONCLUSIVE
    return RobustnessVerdict(v, eps, t, rho)


# -- bounded-attack verification ------------------------------------------------

@dataclass
class VerifyRow:
    id: int
    label: int
    d: float
    t: float
    eps: float
    outcomes: dict
    below_sigma: bool
    cum_successes: int = 0
    cum_fraction: float = 0.0

    @property
    def success(self) -> bool:
        return any(self.outcomes.values())


@dataclass
class VerifyReport:
    rows: list
    sigma_star: float
    rho: float

    @property
    def successes_below_sigma(self) -> int:
        return sum(1 for r in self.rows if r.below_sigma and r.success)

    @property
    def curve(self) -> list[tuple[float, float]]:
        return [(r.d, r.cum_fraction) for r in self.rows]


def verify_experiment(net, samples, attacks: dict, rho: float, sigma_star: float) -> VerifyReport:
    """Attack every sample with budget ``eps = t / rho``.

    ``samples`` yields ``(id, x, label, t, d)``.  Rows come back sorted by
    ``d`` with the cumulative count of attacked-through samples and that count
    as a fraction of all samples.
    """
    rows = []
    for sid, x, l, t, d in samples:
        eps = t / rho
        outcomes = {name: bool(fn(net, x, l, eps).success) for name, fn in attacks.items()}
        rows.append(VerifyRow(sid, l, d, t, eps, outcomes, d < sigma_star))
    rows.sort(key=lambda r: (r.d, r.id))
    n = len(rows)
    count = 0
    for r in rows:
        count += r.success
        r.cum_successes = count
        r.cum_fraction = count / n
    return VerifyReport(rows, sigma_star, rho)
