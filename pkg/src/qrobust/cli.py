"""Command line entry point: ``qrobust train | verify | selftest``.

Exit codes: 0 success, 1 failed self-test, 2 usage or I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import data, selftest
from .classifier import build_qcnn, load_model, save_model, shot_estimate, amplitude_encode
from .training import TrainConfig, evaluate, train, write_history
from .verifier import VerifierConfig, VerificationReport, verify_dataset, verify_p0_list, verify_probs

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# settings a --config file may supply, per command, with their defaults
DEFAULTS = {
    "train": {
        "data": None, "out": None, "history": None, "seed": 0, "epochs": 20,
        "learning_rate": 0.01, "beta1": 0.9, "beta2": 0.999, "adam_epsilon": 1e-8,
        "batch_size": 32, "train_size": 500, "test_size": 200,
    },
    "verify": {
        "model": None, "data": None, "split": "train", "limit": None, "seed": 0,
        "p0": None, "n": 8, "epsilon": 0.0, "format": "csv", "out": None,
        "full_precision": False, "shots": None,
    },
    "selftest": {"group": None, "seed": 0, "cases": 20},
}


class UsageError(Exception):
    pass


def _p0_values(raw: Sequence[str]) -> list[float]:
    vals = []
    for item in raw:
        for part in item.split(","):
            if part.strip():
                vals.append(float(part))
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qrobust", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file with settings; flags take precedence")
        sp.add_argument("--seed", type=int)

    t = sub.add_parser("train", help="train the 8-qubit QCNN on MNIST 0/1")
    common(t)
    t.add_argument("--data", help="directory with MNIST IDX files (default: $QROBUST_DATA_DIR)")
    t.add_argument("--out", help="model file to write")
    t.add_argument("--history", help="history CSV (default: <out>.history.csv)")
    t.add_argument("--epochs", type=int)
    t.add_argument("--learning-rate", "--lr", dest="learning_rate", type=float)
    t.add_argument("--beta1", type=float)
    t.add_argument("--beta2", type=float)
    t.add_argument("--adam-epsilon", type=float)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--train-size", type=int)
    t.add_argument("--test-size", type=int)

    v = sub.add_parser("verify", help="certify robust bounds for a model or explicit p0 values")
    common(v)
    v.add_argument("--model", help="model file written by `train`")
    v.add_argument("--data", help="directory with MNIST IDX files (default: $QROBUST_DATA_DIR)")
    v.add_argument("--split", choices=("train", "test"))
    v.add_argument("--limit", type=int, help="verify a seeded subset of this size")
    v.add_argument("--p0", nargs="+", help="verify these outcome-0 probabilities directly")
    v.add_argument("--n", type=int, help="qubit count for --p0 mode")
    v.add_argument("--epsilon", type=float)
    v.add_argument("--format", choices=("csv", "json"))
    v.add_argument("--out", help="write the report here instead of stdout")
    v.add_argument("--full-precision", action="store_true", default=None)
    v.add_argument("--shots", type=int, help="estimate probabilities from this many shots (statistical)")

    s = sub.add_parser("selftest", help="run reduced-size property checks")
    common(s)
    s.add_argument("--group", action="append", choices=sorted(selftest.GROUPS))
    s.add_argument("--cases", type=int)
    s.add_argument("--inject-failure", metavar="GROUP", help=argparse.SUPPRESS)
    return p


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults < config file < flags and reject unknown config keys."""
    defaults = DEFAULTS[args.command]
    settings = dict(defaults)
    if args.config:
        path = Path(args.config)
        try:
            cfg = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"{path}: cannot read config ({exc})") from None
        if not isinstance(cfg, dict):
            raise UsageError(f"{path}: config must be a JSON object")
        unknown = sorted(set(cfg) - set(defaults))
        if unknown:
            raise UsageError(f"{path}: unknown config key(s) for {args.command}: {', '.join(unknown)}")
        settings.update(cfg)
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    return settings


def _load_split(directory, split: str, size: Optional[int], seed: int):
    if directory is None:
        raise UsageError("no data directory: pass --data or set QROBUST_DATA_DIR")
    samples = data.preprocess(data.load_mnist_dir(directory, split))
    return data.select(samples, size, seed)


def cmd_train(s: dict) -> int:
    if not s["out"]:
        raise UsageError("train needs --out")
    cfg = TrainConfig(
        learning_rate=s["learning_rate"], beta1=s["beta1"], beta2=s["beta2"],
        adam_epsilon=s["adam_epsilon"], epochs=s["epochs"], batch_size=s["batch_size"], seed=s["seed"],
    )
    directory = s["data"] or data.default_data_dir()
    train_set = _load_split(directory, "train", s["train_size"], s["seed"])
    test_set = _load_split(directory, "test", s["test_size"], s["seed"])
    arch = build_qcnn(8)
    result = train(arch, train_set, cfg, test=test_set)
    save_model(s["out"], arch, result.theta)
    write_history(s["history"] or f"{s['out']}.history.csv", result.history)
    tr, te = evaluate(arch, result.theta, train_set), evaluate(arch, result.theta, test_set)
    print(f"train_acc={tr.accuracy:.6g} test_acc={te.accuracy:.6g} model={s['out']}")
    return EXIT_OK


def cmd_verify(s: dict) -> int:
    statistical = False
    if s["p0"]:
        p0s = _p0_values(s["p0"]) if not isinstance(s["p0"], (int, float)) else [float(s["p0"])]
        cfg = VerifierConfig(s["epsilon"], s["n"])
        report = verify_p0_list(p0s, cfg)
    elif s["model"]:
        arch, theta = load_model(s["model"])
        cfg = VerifierConfig(s["epsilon"], arch.n)
        samples = _load_split(s["data"] or data.default_data_dir(), s["split"], s["limit"], s["seed"])
        if s["shots"]:
            statistical = True
            results = []
            for k, smp in enumerate(samples):
                p0, _ = shot_estimate(arch, theta, amplitude_encode(smp.features), s["shots"], s["seed"] + k)
                results.append(verify_probs(p0, cfg))
            report = VerificationReport(cfg.epsilon, cfg.n, results, [x.label for x in samples])
        else:
            report = verify_dataset(samples, arch, theta, cfg)
    else:
        raise UsageError("verify needs --p0 values or --model with a dataset")

    if s["format"] == "json":
        doc = report.to_dict()
        doc["statistical"] = statistical
        text = json.dumps(doc, indent=2) + "\n"
    else:
        text = report.to_csv(bool(s["full_precision"]))
    if s["out"]:
        Path(s["out"]).write_text(text)
    else:
        sys.stdout.write(text)
    summary = report.summary_line() + (" statistical=true" if statistical else "")
    print(summary, file=sys.stderr)
    return EXIT_OK


def cmd_selftest(s: dict, inject: Optional[str] = None) -> int:
    checks = selftest.run(s["group"], seed=s["seed"], cases=s["cases"], inject=inject)
    for c in checks:
        print(f"{'PASS' if c.ok else 'FAIL'} {c.group}: {c.name} (error={c.error:.3g}, tol={c.tol:.3g})")
    failed = [c for c in checks if not c.ok]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_FAIL if failed else EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        settings = resolve(args)
        if args.command == "train":
            return cmd_train(settings)
        if args.command == "verify":
            return cmd_verify(settings)
        return cmd_selftest(settings, args.inject_failure)
    except (UsageError, OSError, ValueError, KeyError) as exc:
        print(f"qrobust: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
