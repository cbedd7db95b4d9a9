import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tubecert import certify, fields
from tubecert.certify import Verdict
from tubecert.errors import EmptyDatasetError, RegionSamplingError
from tubecert.scalarize import make_pair_view

from conftest import random_net


def test_rho_star():
    alpha, rho = certify.rho_star()
    assert abs(rho - 1.461) <= 1e-3
    assert abs(0.5 * (1 - math.cos(alpha)) - 2 * math.cos(2 * alpha)) < 1e-10
    assert 0 < alpha < math.pi / 4


@pytest.mark.parametrize("spec,value", [("sqrt2", math.sqrt(2)), ("rho_star", certify.rho_star()[1]), (2, 2.0),
                                        ("1.7", 1.7)])
def test_parse_rho(spec, value):
    assert certify.parse_rho(spec) == value


def test_rho_alpha_round_trip():
    for rho in (math.sqrt(2), 1.5, 2.0):
        ra = certify.RhoAlpha.from_rho(rho)
        assert certify.RhoAlpha.from_alpha(ra.alpha).rho == pytest.approx(rho)
        assert ra.beta == pytest.approx(math.cos(2 * ra.alpha))
    with pytest.raises(ValueError):
        certify.RhoAlpha.from_rho(1.2)


def test_sigma_hat_examples():
    assert certify.sigma_hat([(0.5, 0.6), (1.0, 1.6), (2.0, 2.2)], 1.5) == 1.0
    assert certify.sigma_hat([(0.3, 0.3), (1.0, 1.0)], 1.2) == math.inf
    with pytest.raises(EmptyDatasetError):
        certify.sigma_hat([], 1.5)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0.01, 5), st.floats(1.0, 4.0)), min_size=1, max_size=40))
def test_sigma_hat_soundness_and_monotonicity(raw):
    pairs = [(d, d * r) for d, r in raw]
    last = 0.0
    for rho in (math.sqrt(2), certify.rho_star()[1], 2.0):
        s = certify.sigma_hat(pairs, rho)
        assert all(t <= rho * d for d, t in pairs if d < s)
        assert s >= last
        last = s


@pytest.mark.parametrize("t,eps,rho,expected", [
    (0.5, 0.6, 1.461, Verdict.NOT_ROBUST),
    (1.0, 0.6, 1.461, Verdict.ROBUST),
    (1.0, 0.75, 1.461, Verdict.INCONCLUSIVE),
])
def test_verdicts(t, eps, rho, expected):
    assert certify.verdict(t, eps, rho).verdict is expected


def _annulus(n_r=11, n_theta=64, r0=0.5, r1=1.5):
    r = np.linspace(r0, r1, n_r)
    th = np.linspace(0, 2 * np.pi, n_theta, endpoint=False)
    R, T = np.meshgrid(r, th)
    return np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])


def _unit_circle(n=64):
    th = np.linspace(0, 2 * np.pi, n, endpoint=False)
    return np.column_stack([np.cos(th), np.sin(th)])


@pytest.mark.parametrize("alpha", [0.2, 0.4, 0.6])
def test_sigma_tilde_circle(alpha):
    sampler = certify.PointSampler(_annulus(), _unit_circle())
    s1, s2 = certify.sigma_lower_bounds(fields.Circle(), sampler, alpha)
    assert s1 == pytest.approx((1 - math.cos(alpha)) / 4, rel=0.05)
    assert s2 == pytest.approx(2 * math.cos(2 * alpha), rel=0.05)


def test_sigma_tilde_affine_infinite():
    f = fields.Affine(np.array([3.0, 4.0]), -1.0)
    sampler = certify.PointSampler(np.random.default_rng(0).standard_normal((20, 2)), np.array([[0.2, 0.1]]))
    assert certify.sigma_lower_bounds(f, sampler, 0.4) == (math.inf, math.inf)


def test_sigma_tilde_affine_network(affine_binary):
    view = make_pair_view(affine_binary, 1, 2)
    sampler = certify.ray_sampler(np.array([[1.0, 1.0]]), np.array([[-0.6, -0.8]]), np.array([1.2]))
    assert certify.sigma_lower_bounds(view, sampler, 0.4) == (math.inf, math.inf)


def test_empty_sampler():
    with pytest.raises(RegionSamplingError):
        certify.sigma_lower_bounds(fields.Circle(), certify.PointSampler(np.zeros((0, 2)), np.zeros((0, 2))), 0.3)


def test_hessian_norm_matches_dense():
    rng = np.random.default_rng(2)
    net = random_net(rng, [3, 8, 2], "tanh", scale=2.0)
    view = make_pair_view(net, 1, 2)
    x = rng.standard_normal(3)
    H = np.column_stack([view.hvp(x, e) for e in np.eye(3)])
    H = 0.5 * (H + H.T)
    assert certify.hessian_norm(view, x, iters=200, tol=1e-12) == pytest.approx(np.abs(np.linalg.eigvalsh(H)).max(),
                                                                              rel=1e-4)


def test_ray_sampler_layout():
    s = certify.ray_sampler(np.array([[0.0, 0.0]]), np.array([[1.0, 0.0]]), np.array([2.0]))
    assert s.omega().shape == (10, 2)
    np.testing.assert_allclose(s.omega()[:, 0], [0.0] + [0.2 * k for k in range(1, 10)])
    np.testing.assert_allclose(s.boundary(), [[2.0, 0.0]])


def test_verify_experiment_affine(affine_binary):
    from tubecert import baselines
    samples = []
    rng = np.random.default_rng(0)
    for i in range(20):
        x = rng.uniform(0.5, 2.0, 2)
        d = (3 * x[0] + 4 * x[1] - 1) / 5
        samples.append((i, x, 1, d, d))
    rep = certify.verify_experiment(affine_binary, samples, baselines.ATTACKS, certify.rho_star()[1], math.inf)
    assert rep.successes_below_sigma == 0 and all(not r.success for r in rep.rows)
    ds = [r.d for r in rep.rows]
    assert ds == sorted(ds)
    fr = [f for _, f in rep.curve]
    assert all(0 <= f <= 1 for f in fr) and fr == sorted(fr)
