"""``tubecert`` command line: gen, train, distances, sigma, verify, report, run."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from tubecert import _backend
from tubecert.errors import TubecertError
from tubecert.harness import pipeline
from tubecert.harness.config import PipelineConfig

STAGES = ("gen", "train", "distances", "sigma", "verify", "report", "run")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tubecert", description=__doc__)
    p.add_argument("command", choices=STAGES)
    p.add_argument("--config", help="JSON config file (defaults used when omitted)")
    p.add_argument("--seed", type=int, help="override the top-level seed")
    p.add_argument("--out", help="output directory (overrides config 'out')")
    p.add_argument("--model", help="model JSON to use instead of out/model.json")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _rows(out: Path):
    rows, _ = pipeline.read_csv(out / "distances.csv", "distances")
    return pipeline.parse_rows(rows)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = PipelineConfig.load(args.config, args.seed) if args.config else \
            PipelineConfig.from_dict(None, args.seed)
        out = Path(args.out or cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        logging.getLogger("tubecert").info("kernel backend: %s", _backend.NAME)
        cmd = args.command
        if cmd == "gen":
            print(pipeline.run_gen(cfg, out))
        elif cmd == "train":
            rep = pipeline.run_train(cfg, out)
            print(f"train accuracy {rep.train_accuracy:.4f}, test accuracy {rep.test_accuracy:.4f}")
        elif cmd == "distances":
            data = pipeline.prepare_data(cfg)
            net = pipeline.load_model(cfg, out, args.model, data)
            rows = pipeline.run_distance_compare(cfg, net, data, out)
            print(f"{len(rows)} samples -> {out / 'distances.csv'}")
        elif cmd == "sigma":
            net = pipeline.load_model(cfg, out, args.model)
            pipeline.run_sigma(cfg, net, _rows(out), out)
            print(out / "sigma.csv")
        elif cmd == "verify":
            net = pipeline.load_model(cfg, out, args.model)
            srows = pipeline.parse_rows(pipeline.read_csv(out / "sigma.csv", "sigma")[0])
            rep = pipeline.run_verify(cfg, net, _rows(out), pipeline.sigma_star_from(srows), out)
            print(f"{rep.successes_below_sigma} successes below sigma_hat* = {rep.sigma_star:.6g}")
        elif cmd == "report":
            print(pipeline.report(cfg, out), end="")
        else:
            print(pipeline.run_all(cfg, out, args.model), end="")
    except (TubecertError, FileNotFoundError) as exc:
        print(f"tubecert: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
