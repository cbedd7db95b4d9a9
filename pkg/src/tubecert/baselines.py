"""Reference distance method (DeepFool) and L2-bounded attacks (FGM, PGD)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tubecert import diffnet
from tubecert.diffnet import Network, ScalarSelector
from tubecert.errors import PreconditionError

CLIP_SLACK = 1e-9


@dataclass
class DeepFoolResult:
    distance: float
    point: np.ndarray
    iterations: int
    success: bool


@dataclass
class AttackResult:
    success: bool
    point: np.ndarray | None
    norm: float
    method: str
    eps: float


def _check(net, x, l):
    x = np.asarray(x, dtype=np.float64)
    k = diffnet.predicted_class(net, x)
    if k != l:
        raise PreconditionError(f"sample is classified as {k}, not {l}")
    return x


def deepfool(net: Network, x, l: int, max_iter: int = 50, overshoot: float = 0.0) -> DeepFoolResult:
    """Iterated linearised minimal step toward the nearest pairwise boundary.

    Stops as soon as the label changes (or the top scores tie).  With
    ``overshoot > 0`` the accumulated perturbation is scaled by
    ``1 + overshoot`` before each class check, as in the original method.
    """
    x = _check(net, x, l)
    r = np.zeros_like(x)
    point = x
    for k in range(1, max_iter + 1):
        best = None
        for j in range(1, net.n_scores + 1):
            if j == l:
                continue
            F, g = diffnet.value_and_gradient(net, point, ScalarSelector.pair(l, j))
            gn = float(np.linalg.norm(g))
            if gn == 0.0:
                continue
            step = abs(F) / gn
            if best is None or step < best[0]:
                best = (step, F, g, gn)
        if best is None:
            break
        _, F, g, gn = best
        r = r - (F / gn ** 2) * g
        point = x + (1.0 + overshoot) * r
        if diffnet.predicted_class(net, point) != l:
            return DeepFoolResult(float(np.linalg.norm(point - x)), point, k, True)
    return DeepFoolResult(float(np.linalg.norm(point - x)), point, max_iter, False)


def clip_l2(delta: np.ndarray, eps: float) -> np.ndarray:
    """Radial projection onto the closed eps-ball."""
    n = float(np.linalg.norm(delta))
    if n > eps:
        return delta * (eps / n)
    return delta


def _result(net, x, l, adv, method, eps):
    delta = adv - x
    success = diffnet.predicted_class(net, adv) != l
    return AttackResult(success, adv if success else None, float(np.linalg.norm(delta)), method, eps)


def fgm_l2(net: Network, x, l: int, eps: float) -> AttackResult:
    """One normalised-gradient step of length ``eps`` that lowers the outer margin."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    x = _check(net, x, l)
    _, g = diffnet.value_and_gradient(net, x, ScalarSelector.outer(l))
    gn = float(np.linalg.norm(g))
    if gn == 0.0:
        return AttackResult(False, None, 0.0, "fgm", eps)
    adv = x + clip_l2(-eps * g / gn, eps)
    return _result(net, x, l, adv, "fgm", eps)


def pgd_l2(net: Network, x, l: int, eps: float, steps: int = 40, step_size: float | None = None) -> AttackResult:
    """Normalised-gradient descent on the outer margin, projected onto the eps-ball.

    Stops early once the iterate is misclassified; no random start.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    x = _check(net, x, l)
    if step_size is None:
        step_size = 2.5 * eps / steps
    sel = ScalarSelector.outer(l)
    adv = x.copy()
    for _ in range(steps):
        _, g = diffnet.value_and_gradient(net, adv, sel)
        gn = float(np.linalg.norm(g))
        if gn == 0.0:
            break
        adv = x + clip_l2(adv - step_size * g / gn - x, eps)
        if diffnet.predicted_class(net, adv) != l:
            break
    return _result(net, x, l, adv, "pgd", eps)


def deepfool_clipped(net: Network, x, l: int, eps: float, max_iter: int = 50) -> AttackResult:
    """DeepFool perturbation radially clipped to the eps-ball."""
    x = _check(net, x, l)
    df = deepfool(net, x, l, max_iter)
    adv = x + clip_l2(df.point - x, eps)
    return _result(net, x, l, adv, "deepfool", eps)


ATTACKS = {"fgm": fgm_l2, "pgd": pgd_l2, "deepfool": deepfool_clipped}
