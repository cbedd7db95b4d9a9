import numpy as np
import pytest

from tubecert import diffnet, fields, oracle
from tubecert.diffnet import Network, ScalarSelector
from tubecert.errors import BoundaryNotFound, ConfigError, OracleFailure, PreconditionError
from tubecert.oracle import PenaltyConfig


def test_affine_binary(affine_binary):
    gt = oracle.iterative_penalty(affine_binary, [1.0, 1.0], 1)
    assert gt.converged
    assert gt.d == pytest.approx(1.2, abs=1e-3)
    assert -5e-5 < diffnet.scalar(affine_binary, gt.point, ScalarSelector.pair(1, 2)) <= 0


def test_affine3(affine3):
    gt = oracle.iterative_penalty(affine3, [2.0, 0.5], 1)
    assert gt.d == pytest.approx(1.5 / np.sqrt(2), abs=1e-3)


def test_circle_field():
    gt = oracle.iterative_penalty(fields.Circle(), np.array([2.0, 0.0]))
    assert gt.d == pytest.approx(1.0, abs=1e-3)


def test_result_is_min_over_converged_trials(affine_binary):
    gt = oracle.iterative_penalty(affine_binary, [1.0, 1.0], 1)
    assert len(gt.trials) == 12
    conv = [t.norm for t in gt.trials if t.converged]
    assert gt.d == min(conv)
    assert gt.inner_iters == sum(t.iterations for t in gt.trials)


def test_literal_c_rule_available(affine_binary):
    gt = oracle.iterative_penalty(affine_binary, [1.0, 1.0], 1, PenaltyConfig(c_search="grow"))
    assert gt.converged and gt.d >= 1.2 - 1e-4


def test_monotone_penalty_sanity(moons_net, moons_samples):
    # a converged trial with larger c is never much better than the best so far
    for x, l in moons_samples[:15]:
        gt = oracle.iterative_penalty(moons_net, x, l)
        best = None
        for tr in gt.trials:
            if not tr.converged:
                continue
            if best is not None and tr.c > best[0]:
                assert tr.norm >= best[1] - 1e-3
            if best is None or tr.norm < best[1]:
                best = (tr.c, tr.norm)


def test_feasibility(moons_net, moons_samples):
    for x, l in moons_samples[:15]:
        gt = oracle.iterative_penalty(moons_net, x, l)
        assert diffnet.predicted_class(moons_net, gt.point) in (0, 3 - l) or \
            -5e-5 < diffnet.scalar(moons_net, gt.point, ScalarSelector.outer(l)) <= 0


def test_oracle_failure(affine_binary):
    cfg = PenaltyConfig(max_gd_iters=5, c_bisections=2)
    with pytest.raises(OracleFailure):
        oracle.iterative_penalty(affine_binary, [1.0, 1.0], 1, cfg)


def test_precondition(affine_binary):
    with pytest.raises(PreconditionError):
        oracle.iterative_penalty(affine_binary, [-1.0, -1.0], 1)


@pytest.mark.parametrize("kw", [{"c_low": 5, "c_up": 1}, {"tol": 0}, {"c_search": "nope"}])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        PenaltyConfig(**kw)


def test_warm_start_flag(affine_binary):
    # warm-started trials begin inside the band, so they stop at once
    gt = oracle.iterative_penalty(affine_binary, [1.0, 1.0], 1, PenaltyConfig(warm_start=True))
    first = next(i for i, t in enumerate(gt.trials) if t.converged)
    assert all(t.iterations == 0 for t in gt.trials[first + 1:])
    assert gt.d == gt.trials[first].norm


def test_grid_circle():
    assert oracle.grid_projection(fields.Circle(), [2.0, 0.0], 2001) == pytest.approx(1.0, abs=2e-3)


def test_grid_parabola():
    assert oracle.grid_projection(fields.Parabola(), [0.0, 0.5], 2001) == pytest.approx(0.5, abs=2e-3)


def test_grid_sine_below_linearization():
    f = fields.SineStress()
    x = np.array([3.0, 0.0])
    assert oracle.grid_projection(f, x, 2001) < oracle.linearized_distance(f, x)


def test_grid_no_boundary():
    with pytest.raises(BoundaryNotFound):
        oracle.grid_projection(fields.Circle(), [10.0, 10.0], 201, half_width=1.0)


def test_zero_row_network_penalty():
    # binary net given as a single output row
    net = Network.from_arrays([np.array([[0.0, 2.0]])], [np.array([-1.0])], [None])
    gt = oracle.iterative_penalty(net, [0.0, 2.0], 1)
    assert gt.d == pytest.approx(1.5, abs=1e-3)
