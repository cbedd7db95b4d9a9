"""Seeded 2D toy datasets and a plain CSV format for them.

Labels are 1-based.  ``sine_stress`` labels points by the sign of
``y - sin(x^2)``, a boundary on which nearest points are not unique.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from tubecert.errors import ConfigError

DATASET_SCHEMA = "tubecert.dataset/1"


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    name: str = "custom"

    def __len__(self):
        return self.X.shape[0]

    def split(self, test_fraction: float, seed: int) -> tuple["Dataset", "Dataset"]:
        rng = np.random.default_rng(seed)
        perm = rng.permutation(len(self))
        n_test = int(round(test_fraction * len(self)))
        te, tr = perm[:n_test], perm[n_test:]
        return (Dataset(self.X[tr], self.y[tr], self.name),
                Dataset(self.X[te], self.y[te], self.name))


def two_moons(n=1000, noise=0.1, seed=0):
    rng = np.random.default_rng(seed)
    n_out = n // 2
    n_in = n - n_out
    a = np.linspace(0, np.pi, n_out)
    b = np.linspace(0, np.pi, n_in)
    X = np.vstack([
        np.column_stack([np.cos(a), np.sin(a)]),
        np.column_stack([1 - np.cos(b), 0.5 - np.sin(b)]),
    ])
    y = np.concatenate([np.ones(n_out, dtype=np.int64), np.full(n_in, 2, dtype=np.int64)])
    X = X + noise * rng.standard_normal(X.shape)
    perm = rng.permutation(n)
    return X[perm], y[perm]


def circles(n=500, r=1.0, seed=0, extent=2.0):
    """Uniform points in a square; label 1 outside the circle of radius ``r``, 2 inside."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-extent, extent, size=(n, 2))
    y = np.where(np.linalg.norm(X, axis=1) > r, 1, 2).astype(np.int64)
    return X, y


def blobs(n=300, centers=3, std=0.5, seed=0, spread=4.0, dim=2):
    rng = np.random.default_rng(seed)
    if np.isscalar(centers):
        k = int(centers)
        angles = 2 * np.pi * np.arange(k) / k
        C = np.zeros((k, dim))
        C[:, 0] = spread * np.cos(angles)
        C[:, 1] = spread * np.sin(angles)
    else:
        C = np.asarray(centers, dtype=np.float64)
    k = C.shape[0]
    y = np.arange(n) % k
    X = C[y] + std * rng.standard_normal((n, C.shape[1]))
    perm = rng.permutation(n)
    return X[perm], (y[perm] + 1).astype(np.int64)


def sine_stress(n=1000, seed=0, x_extent=3.0, y_extent=1.5):
    rng = np.random.default_rng(seed)
    X = np.column_stack([rng.uniform(-x_extent, x_extent, n), rng.uniform(-y_extent, y_extent, n)])
    y = np.where(X[:, 1] - np.sin(X[:, 0] ** 2) > 0, 1, 2).astype(np.int64)
    return X, y


GENERATORS = {"two_moons": two_moons, "circles": circles, "blobs": blobs, "sine_stress": sine_stress}


def generate_dataset(name: str, params: dict | None = None, seed: int = 0) -> Dataset:
    try:
        gen = GENERATORS[name]
    except KeyError:
        raise ConfigError(f"unknown dataset {name!r}; choose from {sorted(GENERATORS)}") from None
    X, y = gen(seed=seed, **(params or {}))
    return Dataset(np.asarray(X, dtype=np.float64), y, name)


def save_csv(ds: Dataset, path, split=None) -> None:
    """Write ``x_0..x_{n-1},label[,split]`` with a schema comment line."""
    n = ds.X.shape[1]
    cols = [f"x_{i}" for i in range(n)] + ["label"] + (["split"] if split is not None else [])
    lines = [f"# {DATASET_SCHEMA} name={ds.name}", ",".join(cols)]
    for i in range(len(ds)):
        row = [format(float(v), ".17g") for v in ds.X[i]] + [str(int(ds.y[i]))]
        if split is not None:
            row.append(split[i])
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_csv(path) -> tuple[Dataset, list | None]:
    text = Path(path).read_text().splitlines()
    name = "custom"
    if text and text[0].startswith("#"):
        head = text.pop(0)
        if DATASET_SCHEMA not in head:
            raise ConfigError(f"{path}: unsupported dataset schema line {head!r}")
        for tok in head.split():
            if tok.startswith("name="):
                name = tok[5:]
    cols = text[0].split(",")
    xi = [i for i, c in enumerate(cols) if c.startswith("x_")]
    li = cols.index("label")
    si = cols.index("split") if "split" in cols else None
    rows = [r.split(",") for r in text[1:] if r]
    X = np.array([[float(r[i]) for i in xi] for r in rows], dtype=np.float64)
    y = np.array([int(r[li]) for r in rows], dtype=np.int64)
    split = [r[si] for r in rows] if si is not None else None
    return Dataset(X, y, name), split
