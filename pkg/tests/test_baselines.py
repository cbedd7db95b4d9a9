import numpy as np
import pytest

from tubecert import baselines, diffnet, oracle
from tubecert.errors import PreconditionError

EPS_GRID = np.round(np.arange(0.05, 0.501, 0.05), 2)


def test_deepfool_affine_binary(affine_binary):
    res = baselines.deepfool(affine_binary, [1.0, 1.0], 1)
    assert res.success and res.iterations == 1
    assert res.distance == pytest.approx(1.2, abs=1e-12)


def test_deepfool_affine3(affine3):
    res = baselines.deepfool(affine3, [2.0, 0.5], 1)
    assert res.iterations == 1
    assert res.distance == pytest.approx(1.5 / np.sqrt(2), abs=1e-12)


def test_deepfool_moons(moons_net, moons_samples):
    iters, gaps = [], []
    for x, l in moons_samples[:40]:
        res = baselines.deepfool(moons_net, x, l)
        assert res.success
        iters.append(res.iterations)
        gaps.append(oracle.iterative_penalty(moons_net, x, l).d - res.distance)
    assert np.median(iters) <= 3
    assert max(gaps) <= 1e-3


@pytest.mark.parametrize("attack", [baselines.fgm_l2, baselines.pgd_l2, baselines.deepfool_clipped])
def test_affine_attack_threshold(affine_binary, attack):
    x = np.array([1.0, 1.0])
    assert attack(affine_binary, x, 1, 1.01 * 1.2).success
    res = attack(affine_binary, x, 1, 0.99 * 1.2)
    assert not res.success and res.norm <= 0.99 * 1.2 + 1e-12


def test_clip_l2():
    np.testing.assert_allclose(baselines.clip_l2(np.array([3.0, 4.0]), 1.0), [0.6, 0.8])
    np.testing.assert_array_equal(baselines.clip_l2(np.array([0.1, 0.0]), 1.0), [0.1, 0.0])


def test_attacks_stay_in_ball(moons_net, moons_samples):
    for x, l in moons_samples[:20]:
        for name, fn in baselines.ATTACKS.items():
            res = fn(moons_net, x, l, 0.2)
            assert res.norm <= 0.2 * (1 + 1e-12)


def _rates(net, samples, fn):
    return [np.mean([fn(net, x, l, e).success for x, l in samples]) for e in EPS_GRID]


def test_success_rate_monotone_and_pgd_dominates(moons_net, moons_samples):
    samples = moons_samples[:60]
    fgm = _rates(moons_net, samples, baselines.fgm_l2)
    pgd = _rates(moons_net, samples, baselines.pgd_l2)
    assert all(np.diff(fgm) >= 0) and all(np.diff(pgd) >= 0)
    assert all(p >= f for p, f in zip(pgd, fgm))


def test_precondition(affine_binary):
    with pytest.raises(PreconditionError):
        baselines.fgm_l2(affine_binary, [-1.0, -1.0], 1, 0.1)
    with pytest.raises(ValueError):
        baselines.pgd_l2(affine_binary, [1.0, 1.0], 1, 0.0)


def test_successful_attack_point_misclassified(moons_net, moons_samples):
    for x, l in moons_samples[:30]:
        res = baselines.pgd_l2(moons_net, x, l, 0.5)
        if res.success:
            assert diffnet.predicted_class(moons_net, res.point) != l
