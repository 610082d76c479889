"""Command line: ``vqpqel gen-data | train | predict | report-gates | theorem1-scan | reproduce``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__, datasets, experiments
from .accounting import gate_report
from .config import ConfigError, RunConfig, default_seed, git_describe, load_config
from .encoding import (EncodingError, LabeledDataset, RegisterLayout, build_phi_k, normalize, read_csv_table,
                       read_dataset_csv, write_dataset_csv)
from .ensemble import EnsembleModel, beliefs, classify_batch, train_ensemble
from .predictor import accuracy, predict_batch
from .training import TrainingError, train_vqp
from .vqp import VQPModel, index_controlled_x, init_model, schedule_iterations

log = logging.getLogger("vqpqel")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
DATA_KINDS = ("linear8", "linear-test", "nonlinear", "nonlinear-far", "toy4", "toy-test")
EXPERIMENTS = ("toy", "linear", "noise", "ensemble")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(path: Path, command: str, params: dict, outputs: list[Path]) -> None:
    manifest = {
        "command": command,
        "params": params,
        "version": __version__,
        "git_describe": git_describe(),
        "outputs": {p.name: _sha256(p) for p in outputs if p.is_file()},
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def _seed(args) -> int:
    return args.seed if args.seed is not None else default_seed()


# ---------------------------------------------------------------------------
# gen-data

def generate(kind: str, n: int | None, seed: int) -> LabeledDataset:
    rng = np.random.default_rng(seed)
    if kind == "linear8":
        return datasets.linear8()
    if kind == "toy4":
        return datasets.toy4()
    if kind == "linear-test":
        return experiments.linear_test_set(n or 100, rng)
    if kind == "nonlinear":
        return datasets.sample_nonlinear(n or 10000, rng)
    if kind == "nonlinear-far":
        return datasets.sample_nonlinear(n or 300, rng, datasets.FAR_MARGIN)
    if kind == "toy-test":
        return datasets.sample_toy_test(n or 200, rng)
    raise ConfigError(f"unknown dataset kind {kind!r}")


def cmd_gen_data(args) -> int:
    seed = _seed(args)
    data = generate(args.kind, args.n, seed)
    out = Path(args.out)
    write_dataset_csv(data, out)
    write_manifest(out.with_suffix(".manifest.json"), "gen-data",
                   {"kind": args.kind, "n": data.N, "seed": seed}, [out])
    print(f"wrote {data.N} rows to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train

def _load_training_data(cfg: RunConfig) -> LabeledDataset:
    if cfg.dataset is None:
        raise ConfigError("config needs a dataset path")
    data = read_dataset_csv(cfg.dataset)
    if cfg.ensemble is None:
        if not 0 <= cfg.k < data.N:
            raise ConfigError(f"k={cfg.k} out of range for {data.N} examples")
        if cfg.stored_label_flipped:
            data = replace(data, flipped=cfg.k)
    return data


def cmd_train(args) -> int:
    cfg = load_config(args.config, seed=args.seed)
    if args.workers is not None and cfg.ensemble is not None:
        cfg.ensemble = replace(cfg.ensemble, workers=args.workers)
    data = _load_training_data(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    if cfg.ensemble is not None:
        model = train_ensemble(data, cfg.ensemble, cfg.train)
        model.save(out / "ensemble")
        outputs = sorted((out / "ensemble").iterdir())
        print(f"trained {len(model.learners)} learners; "
              + ", ".join(f"P(k)={m.calibrated_p:.4f}" for m in model.learners))
    else:
        data = normalize(data, "uniform")
        fixed = None
        if cfg.disentangler == "index_controlled":
            fixed = index_controlled_x(RegisterLayout.for_dataset(data), cfg.k)
        L2 = None if fixed is not None else cfg.L2
        if cfg.train.iterations == 0:
            log.info("zero iterations: the model is its initialization")
        model, trace = train_vqp(data, cfg.k, cfg.L1, L2, cfg.train, fixed_dis=fixed, threshold=cfg.threshold)
        model.save(out / "model.json")
        trace.to_csv(out / "trace.csv")
        outputs = [out / "model.json", out / "trace.csv"]
        print(f"final P(k={cfg.k}) = {model.calibrated_p:.4f}")
    write_manifest(out / "manifest.json", "train", cfg.to_dict(), outputs)
    return EXIT_OK


# ---------------------------------------------------------------------------
# predict

def _load_model(path: Path):
    if path.is_dir():
        return EnsembleModel.load(path)
    return VQPModel.load(path)


def cmd_predict(args) -> int:
    model = _load_model(Path(args.model))
    features, labels = read_csv_table(args.data)
    width = model.learners[0].layout.M if isinstance(model, EnsembleModel) else model.layout.M
    if features.size and features.shape[1] != width:
        raise EncodingError(f"model expects {width} features, data has {features.shape[1]}")
    if isinstance(model, EnsembleModel):
        pred = classify_batch(model, features)
        score = np.array([beliefs(model, x).sum() for x in features]) if len(features) else np.zeros(0)
        score_name = "belief"
    else:
        pred, score = predict_batch(model, features, args.threshold)
        score_name = "probability"
    out = Path(args.out)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", score_name])
        for y, s in zip(pred, score):
            w.writerow([int(y), repr(float(s))])
    params = {"model": str(args.model), "data": str(args.data), "threshold": args.threshold, "rows": len(pred)}
    if labels is not None and len(labels):
        params["accuracy"] = accuracy(pred, labels)
        print(f"accuracy {params['accuracy']:.4f} on {len(labels)} rows")
    else:
        print(f"predicted {len(pred)} rows")
    write_manifest(out.with_suffix(".manifest.json"), "predict", params, [out])
    return EXIT_OK


# ---------------------------------------------------------------------------
# report-gates

def cmd_report_gates(args) -> int:
    if args.config:
        cfg = load_config(args.config, seed=0)
        data = _load_training_data(cfg)
        k = cfg.k if cfg.ensemble is None else data.N - 1
        L1, L2, rule, cycles = cfg.L1, cfg.L2, cfg.train.schedule_rule, cfg.train.cycles
    else:
        data, k, L1, L2, rule, cycles = datasets.linear8(), 7, 3, 3, "paper_sqrt", None
    data = normalize(data, "uniform")
    cycles = cycles or schedule_iterations(data.N, rule).iterations
    model = init_model(data, k, L1, L2, np.random.default_rng(0), cycles=cycles)
    report = gate_report(model, build_phi_k(data, k))
    rows = report.rows()
    width = max(len(name) for name, _ in rows)
    for name, count in rows:
        print(f"{name:<{width}}  {count}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["category", "count"])
            w.writerows(rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# theorem1-scan

def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def cmd_leakage_scan(args) -> int:
    seed = _seed(args)
    try:
        eps, cycles = _floats(args.epsilons), _ints(args.cycles)
    except ValueError as exc:
        raise ConfigError(f"bad list: {exc}") from exc
    if any(not 0 <= e < 1 for e in eps):
        raise ConfigError("every epsilon must lie in [0, 1)")
    rows = experiments.leakage_scan(eps, cycles, seed)
    out = Path(args.out)
    experiments.write_results(out, rows)
    for r in rows:
        print(f"eps={r.epsilon:<6g} S={r.cycles}  p={r.p_ideal:.6f}  q={r.q_measured:.6f}  "
              f"(1-eps)^S p={r.q_predicted:.6f}")
    write_manifest(out.with_suffix(".manifest.json"), "theorem1-scan",
                   {"epsilons": eps, "cycles": cycles, "seed": seed}, [out])
    return EXIT_OK


# ---------------------------------------------------------------------------
# reproduce

def cmd_reproduce(args) -> int:
    seeds = list(range(args.seeds))
    if args.experiment == "toy":
        results = experiments.map_seeds(experiments.toy_run, seeds, args.workers)
    elif args.experiment == "linear":
        results = experiments.map_seeds(experiments.LinearSpec(args.layers), seeds, args.workers)
    elif args.experiment == "noise":
        results = []
        for p in (0.0, 0.00025, 0.001):
            results += experiments.map_seeds(experiments.LinearSpec(args.layers, p), seeds, args.workers)
    else:
        results = experiments.map_seeds(experiments.EnsembleSpec(), seeds, args.workers)
    out = Path(args.out)
    experiments.write_results(out, results)
    for r in results:
        print(json.dumps(asdict(r), default=str))
    write_manifest(out.with_suffix(".manifest.json"), "reproduce",
                   {"experiment": args.experiment, "seeds": seeds, "layers": args.layers}, [out])
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vqpqel", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a dataset CSV")
    p.add_argument("kind", choices=DATA_KINDS)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a VQP or an ensemble from a TOML/JSON config")
    p.add_argument("config")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", aliases=["classify"], help="label rows of a CSV with a trained model")
    p.add_argument("model", help="model JSON or ensemble directory")
    p.add_argument("data")
    p.add_argument("--threshold", type=float, help="overrides the model's threshold (single VQP)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("report-gates", help="gate counts of one search pipeline")
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report_gates)

    p = sub.add_parser("theorem1-scan", help="success probability under disentangler leakage")
    p.add_argument("--epsilons", default="0,0.01,0.05,0.1")
    p.add_argument("--cycles", default="1,2,3")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_leakage_scan)

    p = sub.add_parser("reproduce", help="seeded runs of a reference experiment")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainingError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, EncodingError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
