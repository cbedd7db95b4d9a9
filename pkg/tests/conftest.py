import numpy as np
import pytest

from tubecert.diffnet import Network
from tubecert.harness import datasets, train
from tubecert.harness.config import PipelineConfig


def random_net(rng, sizes, activation="tanh", scale=1.0):
    Ws = [scale * rng.standard_normal((o, i)) / np.sqrt(i) for i, o in zip(sizes[:-1], sizes[1:])]
    bs = [0.1 * rng.standard_normal(o) for o in sizes[1:]]
    acts = [activation] * (len(sizes) - 2) + [None]
    return Network.from_arrays(Ws, bs, acts)


@pytest.fixture
def affine3():
    """f1 = x1, f2 = x2, f3 = 0."""
    return Network.from_arrays([np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])], [np.zeros(3)], [None])


@pytest.fixture
def affine_binary():
    """Single output 3 x1 + 4 x2 - 1."""
    return Network.from_arrays([np.array([[3.0, 4.0]])], [np.array([-1.0])], [None])


@pytest.fixture(scope="session")
def moons_data():
    ds = datasets.generate_dataset("two_moons", {"n": 1000, "noise": 0.1}, 7)
    tr, te = ds.split(0.3, 7)
    return ds, tr, te


@pytest.fixture(scope="session")
def moons_net(moons_data):
    """The default pipeline model: 2x16 tanh, 150 epochs, seed 7."""
    _, tr, te = moons_data
    cfg = PipelineConfig.from_dict()
    return train.train(cfg.model_spec(), tr.X, tr.y, cfg.trainer_spec(), te.X, te.y).net


@pytest.fixture(scope="session")
def moons_samples(moons_net, moons_data):
    _, _, te = moons_data
    from tubecert import diffnet
    return [(x, int(l)) for x, l in zip(te.X, te.y) if diffnet.predicted_class(moons_net, x) == l]


@pytest.fixture(scope="session")
def moons_run(tmp_path_factory):
    """One full default pipeline run; returns (out_dir, summary_text, seconds)."""
    import time
    from tubecert.harness import pipeline
    out = tmp_path_factory.mktemp("moons_run")
    t0 = time.perf_counter()
    text = pipeline.run_all(PipelineConfig.from_dict(), out)
    return out, text, time.perf_counter() - t0
