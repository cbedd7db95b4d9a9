import numpy as np
import pytest

from tubecert import _backend, _pykernels, oracle, strategies
from tubecert.rootfind import RootConfig

from conftest import random_net

compiled = _backend.compiled
needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled kernels not built")


@needs_compiled
@pytest.mark.parametrize("act", ["tanh", "softplus", "relu"])
def test_forward_and_grad_agree(act):
    rng = np.random.default_rng(1)
    for _ in range(20):
        net = random_net(rng, [3, 7, 5, 4], act)
        packed = net.packed()
        x = rng.standard_normal(3)
        np.testing.assert_allclose(compiled.forward(*packed, x), _pykernels.forward(*packed, x), rtol=1e-13, atol=1e-14)
        for mode, a, b in [(0, 1, -1), (1, 0, 3), (2, 2, -1)]:
            vc, gc, sc, jc = compiled.value_and_grad(*packed, x, mode, a, b)
            vp, gp, sp, jp = _pykernels.value_and_grad(*packed, x, mode, a, b)
            assert vc == pytest.approx(vp, rel=1e-13, abs=1e-14)
            np.testing.assert_allclose(gc, gp, rtol=1e-12, atol=1e-14)
            assert jc == jp


@needs_compiled
def test_penalty_adam_agrees():
    rng = np.random.default_rng(2)
    net = random_net(rng, [2, 8, 2], "tanh", scale=2.0)
    packed = net.packed()
    for _ in range(5):
        x = rng.standard_normal(2)
        scores = _pykernels.forward(*packed, x)
        l0 = int(np.argmax(scores))
        args = (x, l0, 20.0, 5e-5, 3000, 1e-3, 0.9, 0.999, 1e-8, np.zeros(2))
        dc, okc, itc, mc = compiled.penalty_adam(*packed, *args)
        dp, okp, itp, mp = _pykernels.penalty_adam(*packed, *args)
        assert okc and (okc, itc) == (okp, itp)
        np.testing.assert_allclose(dc, dp, rtol=1e-9, atol=1e-12)


@needs_compiled
def test_switching_backends_gives_same_estimates(moons_net, moons_samples):
    cfg = RootConfig(t_up=4.0)
    for x, l in moons_samples[:10]:
        with _backend.use("compiled"):
            a = strategies.closest_boundary(moons_net, x, l, "bisection", cfg)
            da = oracle.iterative_penalty(moons_net, x, l).d
        with _backend.use("python"):
            b = strategies.closest_boundary(moons_net, x, l, "bisection", cfg)
            db = oracle.iterative_penalty(moons_net, x, l).d
        assert a.t == pytest.approx(b.t, abs=1e-12)
        assert da == pytest.approx(db, abs=1e-9)


def test_backend_name():
    assert _backend.NAME in ("compiled", "python")
    with _backend.use("python") as k:
        assert k is _pykernels and _backend.kernels is _pykernels
