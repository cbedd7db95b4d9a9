import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tubecert import diffnet, fields
from tubecert.diffnet import ActivationKind, Network, ScalarSelector
from tubecert.errors import (ClassIndexError, InputShapeError, ModelFormatError, NumericalError,
                             UnsupportedActivationError)

from conftest import random_net


def test_identity_layer():
    net = Network.from_arrays([np.eye(2)], [np.zeros(2)], [None])
    np.testing.assert_array_equal(diffnet.forward(net, [0.3, -0.7]), [0.3, -0.7])


def test_single_output_affine(affine_binary):
    assert diffnet.forward(affine_binary, [1, 1]) == pytest.approx([6.0])
    assert affine_binary.class_count == 1 and affine_binary.n_scores == 2
    np.testing.assert_array_equal(diffnet.class_scores(affine_binary, [1, 1]), [6.0, 0.0])


def test_input_shape_error(affine_binary):
    with pytest.raises(InputShapeError):
        diffnet.forward(affine_binary, [1.0, 2.0, 3.0])


def test_layer_shape_mismatch():
    with pytest.raises(InputShapeError):
        Network.from_arrays([np.ones((3, 2)), np.ones((2, 4))], [np.zeros(3), np.zeros(2)], ["tanh", None])


@pytest.mark.parametrize("scores,expected", [((2, 1, 0), 1), ((1, 1, 0), 0), ((0, 3, 1), 2)])
def test_argmax_class(scores, expected):
    assert diffnet.argmax_class(np.array(scores, dtype=float)) == expected


def test_moons_cluster_center(moons_net):
    # top of the upper moon
    assert diffnet.predicted_class(moons_net, [0.0, 1.0]) == 1
    assert diffnet.predicted_class(moons_net, [1.0, -0.5]) == 2


def test_affine_gradient(affine_binary):
    for x in ([0, 0], [5, -2]):
        np.testing.assert_array_equal(diffnet.gradient(affine_binary, x, ScalarSelector.component(1)), [3, 4])


@pytest.mark.parametrize("act", ["tanh", "softplus"])
def test_gradient_matches_finite_differences(act):
    rng = np.random.default_rng(3)
    for _ in range(10):
        net = random_net(rng, [3, 8, 8, 4], act)
        x = rng.standard_normal(3)
        for sel in (ScalarSelector.component(2), ScalarSelector.pair(1, 3), ScalarSelector.outer(4)):
            g = diffnet.gradient(net, x, sel)
            h = 1e-4
            fd = np.array([(diffnet.scalar(net, x + h * e, sel) - diffnet.scalar(net, x - h * e, sel)) / (2 * h)
                           for e in np.eye(3)])
            assert np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12) < 1e-5


def test_pair_antisymmetry():
    rng = np.random.default_rng(0)
    net = random_net(rng, [2, 6, 3])
    x = rng.standard_normal(2)
    v12, g12 = diffnet.value_and_gradient(net, x, ScalarSelector.pair(1, 2))
    v21, g21 = diffnet.value_and_gradient(net, x, ScalarSelector.pair(2, 1))
    assert v12 == -v21
    np.testing.assert_allclose(g12, -g21, rtol=0, atol=1e-15)


def test_non_finite_raises():
    net = Network.from_arrays([np.array([[1e308, 1e308]])], [np.zeros(1)], [None])
    with pytest.raises(NumericalError):
        diffnet.value_and_gradient(net, [1e10, 1e10], ScalarSelector.component(1))


def test_selector_validation(affine3):
    with pytest.raises(ClassIndexError):
        diffnet.scalar(affine3, [0, 0], ScalarSelector.pair(1, 4))
    with pytest.raises(ClassIndexError):
        diffnet.scalar(affine3, [0, 0], ScalarSelector.pair(2, 2))
    with pytest.raises(ClassIndexError):
        diffnet.scalar(affine3, [0, 0], ScalarSelector.component(0))


def test_hvp_affine_zero(affine_binary):
    np.testing.assert_allclose(diffnet.hvp(affine_binary, [1, 1], ScalarSelector.component(1), [1, 2]), 0, atol=1e-9)


def test_hvp_circle():
    np.testing.assert_allclose(fields.Circle(1.0).hvp(np.array([0.3, 0.1]), np.array([1.0, 2.0])), [2, 4])


def test_hvp_symmetry_and_linearity():
    rng = np.random.default_rng(11)
    for _ in range(20):
        net = random_net(rng, [3, 10, 10, 2], "tanh")
        x = rng.standard_normal(3)
        v, w = rng.standard_normal(3), rng.standard_normal(3)
        sel = ScalarSelector.pair(1, 2)
        Hv, Hw = diffnet.hvp(net, x, sel, v), diffnet.hvp(net, x, sel, w)
        assert abs(w @ Hv - v @ Hw) / (np.linalg.norm(v) * np.linalg.norm(w)) < 1e-4
        np.testing.assert_allclose(diffnet.hvp(net, x, sel, 2 * v + w), 2 * Hv + Hw, atol=1e-5)


def test_hvp_rejects_relu():
    net = random_net(np.random.default_rng(0), [2, 4, 2], "relu")
    with pytest.raises(UnsupportedActivationError):
        diffnet.hvp(net, [0.1, 0.2], ScalarSelector.pair(1, 2), [1, 0])


def test_weights_read_only(affine3):
    with pytest.raises(ValueError):
        affine3.layers[0].weight[0, 0] = 5.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["tanh", "softplus", "relu"]))
def test_serialization_round_trip(seed, act):
    net = random_net(np.random.default_rng(seed), [2, 5, 3], act)
    back = diffnet.loads(diffnet.dumps(net))
    assert diffnet.dumps(back) == diffnet.dumps(net)
    for a, b in zip(net.layers, back.layers):
        np.testing.assert_array_equal(a.weight, b.weight)
        np.testing.assert_array_equal(a.bias, b.bias)
        assert a.activation is b.activation


def test_load_rejects_bad_schema():
    with pytest.raises(ModelFormatError):
        diffnet.loads('{"schema": "other"}')
    with pytest.raises(ModelFormatError):
        diffnet.loads("not json")


def test_activation_kinds():
    assert ActivationKind.TANH.smooth and ActivationKind.SOFTPLUS.smooth and not ActivationKind.RELU.smooth
