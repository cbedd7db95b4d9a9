"""Binary reductions of a multi-class network and their restriction to a ray."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tubecert import diffnet
from tubecert.diffnet import Network, ScalarSelector
from tubecert.errors import StationaryPointError, UnsupportedActivationError

GRADIENT_FLOOR = 1e-12
# the outer max is flagged as near-tied below this gap
OUTER_TIE_GAP = 1e-6


class BinaryView:
    """Scalar classifier ``F`` derived from a network; ``F > 0`` on the label's side.

    Counts forward and backward passes so strategies can report their cost.
    """

    def __init__(self, net: Network, sel: ScalarSelector):
        if sel.mode not in ("pair", "outer"):
            raise ValueError("a binary view needs a pair or outer selector")
        sel.encode(net)
        self.net = net
        self.sel = sel
        self.forward_passes = 0
        self.backward_passes = 0

    @property
    def smooth(self) -> bool:
        return self.net.smooth

    @property
    def piecewise(self) -> bool:
        """True when the max inside the outer margin can switch branches."""
        return self.sel.mode == "outer" and self.net.n_scores > 2

    def value(self, x) -> float:
        self.forward_passes += 1
        return diffnet.scalar(self.net, x, self.sel)

    def grad(self, x) -> np.ndarray:
        self.forward_passes += 1
        self.backward_passes += 1
        return diffnet.gradient(self.net, x, self.sel)

    def value_and_grad(self, x):
        self.forward_passes += 1
        self.backward_passes += 1
        return diffnet.value_and_gradient(self.net, x, self.sel)

    def hvp(self, x, v) -> np.ndarray:
        if not self.smooth:
            raise UnsupportedActivationError("Hessian products need smooth activations")
        return diffnet.fd_hvp(lambda p: diffnet.gradient(self.net, p, self.sel), x, v)

    def outer_gap(self, x) -> float:
        """Gap between the two largest competitor scores (inf for pair views)."""
        if not self.piecewise:
            return np.inf
        scores = diffnet.class_scores(self.net, x)
        others = np.sort(np.delete(scores, self.sel.a - 1))
        return float(others[-1] - others[-2])

    def __repr__(self):
        return f"BinaryView({self.sel})"


def make_pair_view(net: Network, l: int, j: int) -> BinaryView:
    """``f_l - f_j``."""
    return BinaryView(net, ScalarSelector.pair(l, j))


def make_outer_view(net: Network, l: int) -> BinaryView:
    """``f_l - max_{j != l} f_j``."""
    return BinaryView(net, ScalarSelector.outer(l))


def descent_direction(view, x) -> np.ndarray:
    """Unit vector along which ``|view|`` decreases fastest at ``x``."""
    return direction_from(*view.value_and_grad(x))


def direction_from(value: float, g: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(g))
    if not norm > GRADIENT_FLOOR:
        raise StationaryPointError(f"gradient norm {norm:.3e} below floor at x")
    sign = -1.0 if value >= 0 else 1.0
    return sign * g / norm


@dataclass
class RaySection:
    """Restriction ``g(t) = view(origin + t * direction)``."""

    view: object
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64)
        self.direction = np.asarray(self.direction, dtype=np.float64)
        if abs(float(np.linalg.norm(self.direction)) - 1.0) > 1e-9:
            raise ValueError("ray direction must have unit norm")

    def point(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction

    def g(self, t: float) -> float:
        if t == 0:
            return self.view.value(self.origin)
        return self.view.value(self.point(t))

    def dg(self, t: float) -> float:
        return float(self.view.grad(self.point(t)) @ self.direction)

    __call__ = g


def ray(view, x, nu) -> RaySection:
    return RaySection(view, x, nu)
