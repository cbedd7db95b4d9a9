"""Desk-scale experiment pipeline: distances, empirical radius, bounded attacks.

Each stage reads and writes plain CSV files in an output directory, so the
CLI can run stages separately.  Float columns use ``%.17g`` and rows are
sorted by sample id; identical configs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from tubecert import baselines, certify, diffnet, oracle, strategies
from tubecert.diffnet import Network
from tubecert.errors import ConfigError, EmptyDatasetError, OracleFailure
from tubecert.harness import datasets, train
from tubecert.harness.config import PipelineConfig
from tubecert.scalarize import make_outer_view

log = logging.getLogger(__name__)

ALGO_TAG = {"bisection": "bis", "newton": "newton"}
SCHEMAS = {
    "distances": "tubecert.distances/1",
    "sigma": "tubecert.sigma/1",
    "verify": "tubecert.verify/1",
}


# -- CSV helpers ----------------------------------------------------------------

def fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, kind: str, columns: list, rows: list, meta: dict | None = None) -> None:
    buf = io.StringIO()
    extra = "".join(f" {k}={fmt(v)}" for k, v in (meta or {}).items())
    buf.write(f"# {SCHEMAS[kind]}{extra}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r[c]) for c in columns])
    Path(path).write_text(buf.getvalue())


def read_csv(path, kind: str) -> tuple[list, dict]:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("#") or SCHEMAS[kind] not in lines[0]:
        raise ConfigError(f"{path}: expected schema {SCHEMAS[kind]}")
    meta = {}
    for tok in lines[0][1:].split()[1:]:
        k, _, v = tok.partition("=")
        meta[k] = v
    rows = list(csv.DictReader(lines[1:]))
    return rows, meta


def _num(s: str):
    try:
        return int(s)
    except ValueError:
        try:
            return float(s)
        except ValueError:
            return s


def parse_rows(rows: list) -> list:
    return [{k: _num(v) for k, v in r.items()} for r in rows]


# -- data and model -----------------------------------------------------------------

@dataclass
class Data:
    full: datasets.Dataset
    train: datasets.Dataset
    test: datasets.Dataset


def prepare_data(cfg: PipelineConfig) -> Data:
    spec = cfg["dataset"]
    if spec["path"]:
        full, split = datasets.load_csv(spec["path"])
        if split is not None:
            mask = np.array([s == "test" for s in split])
            return Data(full, datasets.Dataset(full.X[~mask], full.y[~mask], full.name),
                        datasets.Dataset(full.X[mask], full.y[mask], full.name))
    else:
        full = datasets.generate_dataset(spec["name"], spec["params"], cfg.dataset_seed)
    tr, te = full.split(spec["test_fraction"], cfg.dataset_seed)
    return Data(full, tr, te)


def run_gen(cfg: PipelineConfig, out) -> Path:
    data = prepare_data(cfg)
    X = np.vstack([data.train.X, data.test.X])
    y = np.concatenate([data.train.y, data.test.y])
    split = ["train"] * len(data.train) + ["test"] * len(data.test)
    path = Path(out) / "dataset.csv"
    datasets.save_csv(datasets.Dataset(X, y, data.full.name), path, split)
    return path


def run_train(cfg: PipelineConfig, out, data: Data | None = None) -> train.TrainReport:
    data = data or prepare_data(cfg)
    n_classes = int(max(data.train.y.max(), data.test.y.max()))
    rep = train.train(cfg.model_spec(), data.train.X, data.train.y, cfg.trainer_spec(),
                      data.test.X, data.test.y, n_classes)
    out = Path(out)
    diffnet.save(rep.net, out / "model.json")
    metrics = {"train_accuracy": rep.train_accuracy, "test_accuracy": rep.test_accuracy,
               "final_loss": rep.losses[-1], "epochs": len(rep.losses)}
    (out / "train.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    return rep


def load_model(cfg: PipelineConfig, out, model_path=None, data: Data | None = None) -> Network:
    """``model_path``, else ``out/model.json``, else train one now."""
    path = Path(model_path) if model_path else Path(out) / "model.json"
    if path.exists():
        return diffnet.load(path)
    if model_path:
        raise ConfigError(f"model file {path} not found")
    return run_train(cfg, out, data).net


# -- distance comparison ----------------------------------------------------------

def method_keys(cfg: PipelineConfig) -> list:
    return [f"{s}_{ALGO_TAG[a]}" for s in cfg["strategies"] for a in cfg["algorithms"]]


def distance_columns(cfg: PipelineConfig, dim: int) -> list:
    cols = ["id", "label", "split"] + [f"x_{i}" for i in range(dim)]
    cols += ["d_ip", "ip_c", "ip_iters", "d_df", "df_iters"]
    for key in method_keys(cfg):
        cols += [f"t_{key}", f"status_{key}", f"passes_{key}"]
    return cols


def measure_sample(net: Network, x, l: int, cfg: PipelineConfig, root_cfg, pen_cfg) -> dict:
    """All distance estimates for one correctly classified sample."""
    row = {}
    try:
        gt = oracle.iterative_penalty(net, x, l, pen_cfg)
        row.update(d_ip=gt.d, ip_c=gt.c_final, ip_iters=gt.inner_iters)
    except OracleFailure as exc:
        log.info("iterative penalty failed: %s", exc)
        row.update(d_ip=math.nan, ip_c=math.nan, ip_iters=0)
    df = baselines.deepfool(net, x, l)
    row.update(d_df=df.distance if df.success else math.nan, df_iters=df.iterations)
    for s in cfg["strategies"]:
        for a in cfg["algorithms"]:
            key = f"{s}_{ALGO_TAG[a]}"
            try:
                est = strategies.estimate(net, x, l, s, a, root_cfg)
            except ConfigError:
                # Newton is disabled on kinked outer margins of ReLU nets
                est = strategies.DistanceEstimate(math.inf, None, None, strategies.Algorithm(a),
                                                  strategies.Strategy(s), strategies.Status.FAILED)
            row[f"t_{key}"] = est.t if est.ok else math.nan
            row[f"status_{key}"] = est.status.value
            row[f"passes_{key}"] = est.forward_passes + est.backward_passes
    return row


def select_samples(net: Network, test: datasets.Dataset, n: int):
    """First ``n`` correctly classified test points, as ``(id, x, label)``."""
    chosen, skipped = [], 0
    for i in range(len(test)):
        x, l = test.X[i], int(test.y[i])
        if diffnet.predicted_class(net, x) != l:
            skipped += 1
            continue
        chosen.append((i, x, l))
        if len(chosen) == n:
            break
    if not chosen:
        raise EmptyDatasetError("no correctly classified test samples")
    return chosen, skipped


def assign_split(n: int, fraction: float, seed: int) -> list:
    perm = np.random.default_rng(seed).permutation(n)
    est = set(perm[:int(round(fraction * n))].tolist())
    return ["est" if i in est else "held" for i in range(n)]


def run_distance_compare(cfg: PipelineConfig, net: Network, data: Data, out=None) -> list:
    root_cfg = cfg.root_config()
    if root_cfg.t_up is None:
        root_cfg = root_cfg.for_data(data.full.X)
    pen_cfg = cfg.penalty_config()
    samples, skipped = select_samples(net, data.test, cfg["n_samples"])
    log.info("distance compare: %d samples, %d misclassified skipped", len(samples), skipped)

    def work(item):
        sid, x, l = item
        return measure_sample(net, x, l, cfg, root_cfg, pen_cfg)

    if cfg["workers"] > 1:
        with ThreadPoolExecutor(cfg["workers"]) as ex:
            measured = list(ex.map(work, samples))
    else:
        measured = [work(s) for s in samples]
    splits = assign_split(len(samples), cfg["estimation_fraction"], cfg.split_seed)
    rows = []
    for (sid, x, l), m, sp in zip(samples, measured, splits):
        row = {"id": sid, "label": l, "split": sp}
        row.update({f"x_{i}": float(v) for i, v in enumerate(x)})
        row.update(m)
        rows.append(row)
    rows.sort(key=lambda r: r["id"])
    if out is not None:
        write_csv(Path(out) / "distances.csv", "distances", distance_columns(cfg, data.full.X.shape[1]),
                  rows, {"skipped": skipped, "t_up": root_cfg.t_up})
    return rows


def coords(row: dict) -> np.ndarray:
    keys = sorted((k for k in row if k.startswith("x_")), key=lambda k: int(k[2:]))
    return np.array([float(row[k]) for k in keys], dtype=np.float64)


def mutual_rows(rows: list, keys: list) -> list:
    """Rows where the oracle and every listed distance column are finite."""
    return [r for r in rows if all(math.isfinite(float(r[k])) for k in ["d_ip", *keys])]


def distance_table(rows: list, cfg: PipelineConfig) -> list:
    """Mean distance and mean pass count per method over mutually converged rows."""
    tkeys = [f"t_{k}" for k in method_keys(cfg)]
    mut = mutual_rows(rows, ["d_df", *tkeys])
    table = []
    for name, col, passes in [("IP", "d_ip", None), ("DeepFool", "d_df", None)] + \
            [(k, f"t_{k}", f"passes_{k}") for k in method_keys(cfg)]:
        vals = [float(r[col]) for r in mut]
        table.append({
            "method": name,
            "mean": float(np.mean(vals)) if vals else math.nan,
            "mean_passes": float(np.mean([r[passes] for r in mut])) if passes and mut else math.nan,
            "count": len(mut),
        })
    return table


# -- empirical radius and sampled bounds ----------------------------------------------

def _pairs(rows, key):
    return [(float(r["d_ip"]), float(r[f"t_{key}"])) for r in mutual_rows(rows, [f"t_{key}"])]


def curvature_for_rows(net: Network, rows: list, root_cfg_t_key: str = "t_fob_bis"):
    """Sampled curvature statistics of the outer margin, pooled over labels.

    Tube points lie on the descent ray of each sample up to its root.
    """
    pooled = None
    for l in sorted({int(r["label"]) for r in rows}):
        sub = [r for r in rows if int(r["label"]) == l and math.isfinite(float(r[root_cfg_t_key]))]
        if not sub:
            continue
        view = make_outer_view(net, l)
        xs = np.array([coords(r) for r in sub])
        nus = []
        for x in xs:
            value, g = view.value_and_grad(x)
            nus.append(-math.copysign(1.0, value) * g / np.linalg.norm(g))
        ts = np.array([float(r[root_cfg_t_key]) for r in sub])
        st = certify.curvature_stats(view, certify.ray_sampler(xs, np.array(nus), ts))
        if pooled is None:
            pooled = st
        else:
            pooled = certify.CurvatureStats(
                min(pooled.grad_inf_omega, st.grad_inf_omega), max(pooled.hess_sup_omega, st.hess_sup_omega),
                min(pooled.grad_inf_boundary, st.grad_inf_boundary),
                max(pooled.hess_sup_boundary, st.hess_sup_boundary))
    return pooled


SIGMA_COLUMNS = ["rho_name", "rho", "alpha", "beta", "strategy", "algorithm", "sigma_hat",
                 "n_est", "est_violations_below", "n_held", "held_violations_below",
                 "held_violation_fraction", "sigma_tilde_1", "sigma_tilde_2"]


def run_sigma(cfg: PipelineConfig, net: Network, rows: list, out=None) -> list:
    est_rows = [r for r in rows if r["split"] == "est"]
    held_rows = [r for r in rows if r["split"] == "held"]
    stats = None
    if cfg["sigma_tilde"] and net.smooth and "fob" in cfg["strategies"] and "bisection" in cfg["algorithms"]:
        stats = curvature_for_rows(net, est_rows)
    out_rows = []
    for rho_spec in cfg["rhos"]:
        rho = certify.parse_rho(rho_spec)
        ra = certify.RhoAlpha.from_rho(rho)
        s1, s2 = certify.bounds_from_stats(stats, ra.alpha) if stats else (math.nan, math.nan)
        for key in method_keys(cfg):
            s, a = key.split("_")
            est_pairs = _pairs(est_rows, key)
            held_pairs = _pairs(held_rows, key)
            sh = certify.sigma_hat(est_pairs, rho) if est_pairs else math.nan
            est_bad = sum(1 for d, t in est_pairs if d < sh and t > rho * d)
            held_bad = sum(1 for d, t in held_pairs if d < sh and t > rho * d)
            out_rows.append({
                "rho_name": str(rho_spec), "rho": rho, "alpha": ra.alpha, "beta": ra.beta,
                "strategy": s, "algorithm": {v: k for k, v in ALGO_TAG.items()}[a],
                "sigma_hat": sh, "n_est": len(est_pairs), "est_violations_below": est_bad,
                "n_held": len(held_pairs), "held_violations_below": held_bad,
                "held_violation_fraction": held_bad / len(held_pairs) if held_pairs else math.nan,
                "sigma_tilde_1": s1, "sigma_tilde_2": s2,
            })
    if out is not None:
        write_csv(Path(out) / "sigma.csv", "sigma", SIGMA_COLUMNS, out_rows)
    return out_rows


def sigma_star_from(sigma_rows: list) -> float:
    """sigma_hat at rho* for closest-boundary bisection."""
    rs = certify.rho_star()[1]
    for r in sigma_rows:
        if r["strategy"] == "cb" and r["algorithm"] == "bisection" and abs(float(r["rho"]) - rs) < 1e-12:
            return float(r["sigma_hat"])
    raise ConfigError("sigma results lack rho_star for cb/bisection")


# -- bounded-attack verification ----------------------------------------------------

def verify_columns(cfg: PipelineConfig) -> list:
    return (["id", "label", "d", "t", "eps"] + list(cfg["attacks"]) +
            ["success", "below_sigma", "cum_successes", "cum_fraction", "verdict_eps", "verdict_rho", "verdict"])


def run_verify(cfg: PipelineConfig, net: Network, rows: list, sigma_star: float, out=None) -> certify.VerifyReport:
    if not {"cb"} <= set(cfg["strategies"]) or "bisection" not in cfg["algorithms"]:
        raise ConfigError("verification needs the cb/bisection estimates")
    rho = certify.rho_star()[1]
    steps = cfg["pgd_steps"]
    fns = {"fgm": baselines.fgm_l2,
           "pgd": lambda n, x, l, e: baselines.pgd_l2(n, x, l, e, steps=steps),
           "deepfool": baselines.deepfool_clipped}
    attacks = {name: fns[name] for name in cfg["attacks"]}
    mut = mutual_rows(rows, ["t_cb_bis"])
    samples = []
    for r in mut:
        x = coords(r)
        samples.append((int(r["id"]), x, int(r["label"]), float(r["t_cb_bis"]), float(r["d_ip"])))
    report = certify.verify_experiment(net, samples, attacks, rho, sigma_star)
    if out is not None:
        eps_v = float(cfg["verdict_eps"])
        recs = []
        for vr in report.rows:
            rec = {"id": vr.id, "label": vr.label, "d": vr.d, "t": vr.t, "eps": vr.eps,
                   "success": vr.success, "below_sigma": vr.below_sigma, "cum_successes": vr.cum_successes,
                   "cum_fraction": vr.cum_fraction, "verdict_eps": eps_v, "verdict_rho": rho,
                   "verdict": certify.verdict(vr.t, eps_v, rho).verdict.value}
            rec.update(vr.outcomes)
            recs.append(rec)
        write_csv(Path(out) / "verify.csv", "verify", verify_columns(cfg), recs,
                  {"rho": rho, "sigma_star": sigma_star})
    return report


# -- report ----------------------------------------------------------------------------

def _g(v) -> str:
    v = float(v)
    return f"{v:.6g}" if math.isfinite(v) else str(v)


def report(cfg: PipelineConfig, out) -> str:
    out = Path(out)
    lines = ["tubecert summary", ""]
    tj = out / "train.json"
    if tj.exists():
        m = json.loads(tj.read_text())
        lines.append(f"model: train accuracy {m['train_accuracy']:.4f}, test accuracy {m['test_accuracy']:.4f}")
    drows, dmeta = read_csv(out / "distances.csv", "distances")
    rows = parse_rows(drows)
    lines.append(f"samples: {len(rows)} correctly classified ({dmeta.get('skipped', '?')} misclassified skipped), "
                 f"t_up {dmeta.get('t_up', '?')}")
    lines += ["", "average distance from the boundary (mutually converged samples)",
              f"{'method':<12}{'mean':>12}{'passes':>10}{'count':>8}"]
    for r in distance_table(rows, cfg):
        lines.append(f"{r['method']:<12}{_g(r['mean']):>12}{_g(r['mean_passes']):>10}{r['count']:>8}")
    tkeys = [f"t_{k}" for k in method_keys(cfg)]
    for k in tkeys:
        mut = mutual_rows(rows, [k])
        if mut:
            gap = min(float(r[k]) - float(r["d_ip"]) for r in mut)
            lines.append(f"{k}: {len(mut)} converged with IP, min(t - d_ip) = {_g(gap)}")
    if (out / "sigma.csv").exists():
        srows = parse_rows(read_csv(out / "sigma.csv", "sigma")[0])
        lines += ["", "empirical radius sigma_hat (estimation split) and held-out violations below it",
                  f"{'rho':>10}{'method':>14}{'sigma_hat':>12}{'held viol':>11}{'s_tilde_1':>12}{'s_tilde_2':>12}"]
        for r in srows:
            lines.append(f"{_g(r['rho']):>10}{r['strategy'] + '/' + r['algorithm']:>14}{_g(r['sigma_hat']):>12}"
                         f"{r['held_violations_below']:>5}/{r['n_held']:<5}{_g(r['sigma_tilde_1']):>12}"
                         f"{_g(r['sigma_tilde_2']):>12}")
    if (out / "verify.csv").exists():
        vrows, vmeta = read_csv(out / "verify.csv", "verify")
        vrows = parse_rows(vrows)
        below = sum(1 for r in vrows if r["below_sigma"] and r["success"])
        total = sum(r["success"] for r in vrows)
        counts = {}
        for r in vrows:
            counts[r["verdict"]] = counts.get(r["verdict"], 0) + 1
        lines += ["", f"bounded attacks at eps = t / rho* (sigma_hat* = {vmeta.get('sigma_star')})",
                  f"successes: {total}/{len(vrows)} overall, {below} below sigma_hat*",
                  f"verdicts at eps = {cfg['verdict_eps']}: " +
                  ", ".join(f"{k} {v}" for k, v in sorted(counts.items()))]
    text = "\n".join(lines) + "\n"
    (out / "summary.txt").write_text(text)
    return text


def run_all(cfg: PipelineConfig, out, model_path=None) -> str:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    data = prepare_data(cfg)
    run_gen(cfg, out)
    if model_path:
        net = load_model(cfg, out, model_path)
    else:
        net = run_train(cfg, out, data).net
    rows = run_distance_compare(cfg, net, data, out)
    srows = run_sigma(cfg, net, rows, out)
    run_verify(cfg, net, rows, sigma_star_from(srows), out)
    return report(cfg, out)
