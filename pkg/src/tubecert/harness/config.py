"""Pipeline configuration, read from JSON.

Every key is optional; missing keys take the defaults below.  Seeds that are
``null`` inherit the top-level ``seed``, so ``--seed`` reseeds the whole run.

.. code-block:: json

    {
      "seed": 7,
      "dataset": {"name": "two_moons", "params": {"n": 1000, "noise": 0.1},
                  "seed": null, "path": null, "test_fraction": 0.3},
      "model": {"hidden": [16, 16], "activation": "tanh"},
      "trainer": {"optimizer": "adam", "epochs": 150, "batch_size": 128,
                  "lr": 0.001, "momentum": 0.9, "seed": null},
      "strategies": ["cb", "fob"],
      "algorithms": ["bisection", "newton"],
      "root": {"tol": 5e-05, "max_iter": 60, "max_attempts": 10, "t_up": null},
      "penalty": {"tol": 5e-05, "max_gd_iters": 10000, "c_low": 0.0, "c_up": 100.0,
                  "c_bisections": 12, "lr": 0.001, "warm_start": false, "c_search": "shrink",
                  "stall_fraction": 0.1},
      "n_samples": 200,
      "split_seed": null,
      "estimation_fraction": 0.6,
      "rhos": ["sqrt2", "rho_star", 2.0],
      "sigma_tilde": true,
      "attacks": ["fgm", "pgd", "deepfool"],
      "pgd_steps": 40,
      "verdict_eps": 0.25,
      "workers": 1,
      "out": "runs/moons"
    }

``root.t_up = null`` means the diameter of the dataset's bounding box.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from tubecert.errors import ConfigError
from tubecert.harness.train import ModelSpec, TrainerSpec
from tubecert.oracle import PenaltyConfig
from tubecert.rootfind import RootConfig

DEFAULTS = {
    "seed": 7,
    "dataset": {"name": "two_moons", "params": {"n": 1000, "noise": 0.1}, "seed": None,
                "path": None, "test_fraction": 0.3},
    "model": {"hidden": [16, 16], "activation": "tanh"},
    "trainer": {"optimizer": "adam", "epochs": 150, "batch_size": 128, "lr": 1e-3,
                "momentum": 0.9, "seed": None},
    "strategies": ["cb", "fob"],
    "algorithms": ["bisection", "newton"],
    "root": {"tol": 5e-5, "max_iter": 60, "max_attempts": 10, "t_up": None},
    "penalty": {},
    "n_samples": 200,
    "split_seed": None,
    "estimation_fraction": 0.6,
    "rhos": ["sqrt2", "rho_star", 2.0],
    "sigma_tilde": True,
    "attacks": ["fgm", "pgd", "deepfool"],
    "pgd_steps": 40,
    "verdict_eps": 0.25,
    "workers": 1,
    "out": "runs/moons",
}


def _merge(base: dict, over: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if key not in base:
            raise ConfigError(f"unknown config key {where + key!r}")
        if isinstance(base[key], dict) and isinstance(val, dict) and key != "params":
            out[key] = _merge(base[key], val, f"{where}{key}.") if base[key] else dict(val)
        else:
            out[key] = copy.deepcopy(val)
    return out


@dataclass
class PipelineConfig:
    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def from_dict(cls, data: dict | None = None, seed: int | None = None) -> "PipelineConfig":
        raw = _merge(DEFAULTS, data or {})
        if seed is not None:
            raw["seed"] = int(seed)
        cfg = cls(raw)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, seed: int | None = None) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(data, seed)

    def dumps(self) -> str:
        return json.dumps(self.raw, indent=2, sort_keys=True)

    def validate(self) -> None:
        r = self.raw
        if not 0 < r["estimation_fraction"] < 1:
            raise ConfigError("estimation_fraction must lie in (0, 1)")
        if r["n_samples"] < 1:
            raise ConfigError("n_samples must be >= 1")
        if r["workers"] < 1:
            raise ConfigError("workers must be >= 1")
        if not r["verdict_eps"] > 0:
            raise ConfigError("verdict_eps must be positive")
        bad = set(r["strategies"]) - {"cb", "fob"}
        bad |= set(r["algorithms"]) - {"bisection", "newton"}
        bad |= set(r["attacks"]) - {"fgm", "pgd", "deepfool"}
        if bad:
            raise ConfigError(f"unknown strategy/algorithm/attack names {sorted(bad)}")
        # construct once so bad numbers fail early
        self.root_config()
        self.penalty_config()
        self.model_spec()
        self.trainer_spec()

    # -- typed views ----------------------------------------------------------

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    def _seed(self, value) -> int:
        return self.seed if value is None else int(value)

    @property
    def dataset_seed(self) -> int:
        return self._seed(self.raw["dataset"]["seed"])

    @property
    def split_seed(self) -> int:
        return self._seed(self.raw["split_seed"])

    def root_config(self) -> RootConfig:
        try:
            return RootConfig(**self.raw["root"])
        except TypeError as exc:
            raise ConfigError(f"root: {exc}") from None

    def penalty_config(self) -> PenaltyConfig:
        try:
            return PenaltyConfig(**self.raw["penalty"])
        except TypeError as exc:
            raise ConfigError(f"penalty: {exc}") from None

    def model_spec(self) -> ModelSpec:
        m = self.raw["model"]
        return ModelSpec(tuple(int(h) for h in m["hidden"]), m["activation"])

    def trainer_spec(self) -> TrainerSpec:
        t = dict(self.raw["trainer"])
        t["seed"] = self._seed(t["seed"])
        return TrainerSpec(**t)

    def __getitem__(self, key):
        return self.raw[key]
