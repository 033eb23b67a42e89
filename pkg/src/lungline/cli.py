"""
Command-line interface: ``lungline {split,finetune,classify,evaluate,footprint}``.

Reports go to stdout (or ``--out``) as JSON or an aligned text table;
diagnostics go to stderr. Exit status is 0 on success, 1 on a data or
weights error and 2 on a usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

from . import arch, metrics
from .data import TABLE1_SPLIT, TABLE2_SPLIT, TABLE3_SPLIT, SplitSpec, read_manifest, split_dataset, write_manifest
from .errors import LunglineError
from .finetune import TrainConfig, extract_features, finetune_head
from .preprocess import AugmentConfig
from .reported import REPORTED_MODELS
from .tensor import linear, softmax
from .weights import bind_weights, load_lwt, model_weights, save_lwt

log = logging.getLogger("lungline")

REPORT_KINDS = ("classification", "evaluation", "footprint", "split-summary")
PRESETS = {"table1": TABLE1_SPLIT, "table2": TABLE2_SPLIT, "table3": TABLE3_SPLIT}
THREADS_ENV = "LUNGLINE_THREADS"


class UsageError(Exception):
    pass


@dataclass
class Report:
    kind: str
    payload: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in REPORT_KINDS:
            raise ValueError(f"unknown report kind {self.kind!r}")

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, "payload": self.payload}, indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Report":
        obj = json.loads(text)
        return cls(kind=obj["kind"], payload=obj["payload"])

    def to_text(self) -> str:
        return _RENDERERS[self.kind](self.payload)


def pct(value: Optional[float], decimals: int = 0) -> str:
    """Percentage for text tables: integer per class, one decimal for aggregates."""
    if value is None:
        return "undef"
    return f"{100.0 * value:.{decimals}f}"


def _table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    cols = [header] + [list(r) for r in rows]
    widths = [max(len(str(r[i])) for r in cols) for i in range(len(header))]
    lines = []
    for j, r in enumerate(cols):
        lines.append("  ".join(str(c).rjust(w) if i else str(c).ljust(w) for i, (c, w) in enumerate(zip(r, widths))))
        if j == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _render_evaluation(p) -> str:
    names = ("acc", "pre", "rec", "mis", "f1", "sen", "spe")
    header = ["Class", "TP", "TN", "FN", "FP", "Acc", "Pre", "Recall", "Mis", "F-1", "Sen", "Spe"]
    rows = [
        [c["class"], c["tp"], c["tn"], c["fn"], c["fp"], *(pct(c[n]) for n in names)]
        for c in p["per_class"]
    ]
    o = p["overall"]
    rows.append([f"overall ({o['mode']})", "", "", "", "", *(pct(o[n], 1) for n in names)])
    cm_rows = [[name, *map(str, row)] for name, row in zip(p["classes"], p["confusion_matrix"])]
    return (
        _table(header, rows)
        + "\nconfusion matrix (rows = true, columns = predicted)\n"
        + _table(["", *p["classes"]], cm_rows)
    )


def _render_footprint(p) -> str:
    rows = [[p["arch"], "computed", f"{p['total_params']:,}", f"{p['bytes']:,}", f"{p['megabytes']:.2f}", ""]]
    for r in p.get("reported", []):
        mem = "-" if r["reported_memory_mb"] is None else f"{r['reported_memory_mb']:g}"
        rows.append([f"{r['model']} [{r['table']}]", "reported", f"{r['params']:,}",
                     f"{r['computed_bytes']:,}", f"{r['computed_bytes'] / 1e6:.2f}", mem])
    return _table(["Model", "Status", "Params", "Bytes", "MB", "Reported MB"], rows)


def _render_classification(p) -> str:
    classes = p["classes"]
    rows = [[r["path"], r["label"], *(f"{r['probabilities'][c]:.4f}" for c in classes)] for r in p["results"]]
    return _table(["Image", "Prediction", *classes], rows)


def _render_split(p) -> str:
    rows = []
    for part in ("train", "val", "test"):
        counts = p["splits"][part]
        rows.append([part, *(str(counts[c]) for c in p["classes"]), str(sum(counts.values()))])
    return _table(["Split", *p["classes"], "Total"], rows)


_RENDERERS = {
    "evaluation": _render_evaluation,
    "footprint": _render_footprint,
    "classification": _render_classification,
    "split-summary": _render_split,
}


def evaluation_report(cm: metrics.ConfusionMatrix, class_names: Sequence[str], mode: str) -> Report:
    per_class = []
    for c, name in enumerate(class_names):
        t = metrics.class_tally(cm, c)
        row = {"class": name, "tp": t.tp, "tn": t.tn, "fn": t.fn, "fp": t.fp}
        row.update(metrics.class_metrics(t).as_dict())
        per_class.append(row)
    agg = metrics.aggregate(cm, mode)
    overall = {"mode": agg.mode, **agg.metrics.as_dict(), "excluded": agg.excluded}
    return Report("evaluation", {
        "classes": list(class_names),
        "n_samples": cm.total,
        "confusion_matrix": cm.tolist(),
        "per_class": per_class,
        "overall": overall,
    })


def footprint_report(arch_name: str, num_classes: int, width: float, bytes_per_param: int,
                     compare: bool) -> Report:
    if arch_name != "mobilenet_v2":
        raise UsageError(f"unknown architecture {arch_name!r} (only mobilenet_v2 is built)")
    model = arch.build_mobilenet_v2(num_classes, width)
    count = arch.count_params(model)
    nbytes = arch.footprint_bytes(count, bytes_per_param)
    payload = {
        "arch": arch_name,
        "num_classes": num_classes,
        "width_mult": width,
        "bytes_per_param": bytes_per_param,
        "trainable_params": count.trainable,
        "bn_running_stats": count.bn_running_stats,
        "total_params": count.total,
        "bytes": nbytes,
        "megabytes": nbytes / 1e6,
        "mebibytes": nbytes / 2**20,
    }
    if compare:
        payload["reported"] = [
            {
                "status": "reported",
                "table": r.table,
                "source": r.source,
                "model": r.model,
                "params": r.params,
                "reported_memory_mb": r.memory_mb,
                "computed_bytes": arch.footprint_bytes(r.params, bytes_per_param),
            }
            for r in REPORTED_MODELS
        ]
    return Report("footprint", payload)


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}")


def _parse_classes(text: Optional[str]) -> Optional[list[str]]:
    if text is None:
        return None
    names = [c.strip() for c in text.split(",") if c.strip()]
    if len(names) != len(set(names)):
        raise UsageError(f"duplicate class names in --classes {text!r}")
    return names


def load_model(path) -> arch.ModelGraph:
    """Build and bind a MobileNetV2 whose head size is read from the LWT file."""
    container = load_lwt(path)
    if "head.weight" not in container:
        raise LunglineError(f"{path}: no 'head.weight' tensor, cannot infer the class count")
    k = container["head.weight"].shape[0]
    return bind_weights(arch.build_mobilenet_v2(k), container)


def _emit(report: Report, args) -> None:
    text = report.to_json() if args.format == "json" else report.to_text()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _cmd_footprint(args) -> Report:
    return footprint_report(args.arch, args.classes, args.width, args.bytes_per_param, args.compare)


def _parse_counts(text: str) -> SplitSpec:
    counts = {}
    for item in text.split(","):
        try:
            name, nums = item.rsplit("=", 1)
            train, val, test = (int(x) for x in nums.split(":"))
        except ValueError:
            raise UsageError(f"--counts entry {item!r} is not NAME=TRAIN:VAL:TEST")
        counts[name.strip()] = (train, val, test)
    return SplitSpec(counts)


def _cmd_split(args) -> Report:
    spec = _parse_counts(args.counts) if args.counts else PRESETS[args.preset]
    spec = SplitSpec(spec.counts, seed=args.seed)
    manifest = read_manifest(args.manifest)
    parts = split_dataset(manifest, spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for part, m in parts.items():
        write_manifest(m, out_dir / f"{part}.csv")
    classes = list(spec.counts)
    return Report("split-summary", {
        "seed": args.seed,
        "classes": classes,
        "splits": {part: m.class_counts() for part, m in parts.items()},
    })


def _root_for(manifest_path, root):
    return Path(root) if root else Path(manifest_path).resolve().parent


def _cmd_classify(args) -> Report:
    model = load_model(args.model)
    classes = _parse_classes(args.classes) or [f"class{i}" for i in range(model.num_classes)]
    if len(classes) != model.num_classes:
        raise UsageError(f"--classes names {len(classes)} classes, model has {model.num_classes}")
    feats = extract_features(model, [Path(p) for p in args.images], threads=_threads())
    wname, bname = model.head.param_names
    probs = softmax(linear(feats, model.params[wname], model.params[bname]))
    results = []
    for path, row in zip(args.images, probs):
        k = int(row.argmax())
        results.append({
            "path": str(path),
            "index": k,
            "label": classes[k],
            "probabilities": {c: float(p) for c, p in zip(classes, row)},
        })
    return Report("classification", {"classes": classes, "results": results})


def _cmd_evaluate(args) -> Report:
    model = load_model(args.model)
    manifest = read_manifest(args.manifest, _parse_classes(args.classes))
    if len(manifest.class_names) != model.num_classes:
        raise LunglineError(
            f"{args.manifest}: {len(manifest.class_names)} classes {list(manifest.class_names)} "
            f"but model {args.model} has {model.num_classes}"
        )
    root = _root_for(args.manifest, args.root)
    feats = extract_features(model, [root / r.path for r in manifest.records], threads=_threads())
    wname, bname = model.head.param_names
    preds = linear(feats, model.params[wname], model.params[bname]).argmax(axis=1)
    cm = metrics.confusion_matrix(preds, manifest.labels, model.num_classes)
    return evaluation_report(cm, manifest.class_names, args.mode)


def _cmd_finetune(args) -> Optional[Report]:
    train = read_manifest(args.train, _parse_classes(args.classes))
    val = read_manifest(args.val, train.class_names) if args.val else None
    model = load_model(args.weights)
    k = len(train.class_names)
    if model.num_classes != k:
        log.info("replacing %d-class head with a %d-class head", model.num_classes, k)
        model = arch.replace_head(model, k, seed=args.seed)
    cfg = TrainConfig(
        epochs=args.epochs, max_lr=args.max_lr, weight_decay=args.weight_decay,
        batch_size=args.batch_size, seed=args.seed, dropout=args.dropout,
    )
    aug = AugmentConfig(seed=args.seed) if args.augment else None
    trained, history = finetune_head(
        model, train, val, cfg, root=_root_for(args.train, args.root),
        augment_cfg=aug, threads=_threads(),
    )
    save_lwt(model_weights(trained), args.out)
    if args.history:
        history.write_csv(args.history)
    last = history.epochs[-1]
    log.info("epoch %d: train_loss=%.4f train_acc=%.4f", last.epoch, last.train_loss, last.train_acc)
    return None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lungline", description="Lightweight chest X-ray CNN toolkit.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def add(name, help_text, report=True):
        p = sub.add_parser(name, help=help_text)
        if report:
            p.add_argument("--format", choices=("json", "text"), default="json")
            p.add_argument("--out", help="write the report here instead of stdout")
        return p

    p = add("split", "stratified train/val/test split of a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--preset", choices=sorted(PRESETS), default="table1")
    p.add_argument("--counts", help="NAME=TRAIN:VAL:TEST[,...]; overrides --preset")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_split)

    p = add("finetune", "train only the classifier head", report=False)
    p.add_argument("--weights", required=True, help="input .lwt (any head size)")
    p.add_argument("--train", required=True)
    p.add_argument("--val")
    p.add_argument("--out", required=True, help="output .lwt")
    p.add_argument("--history", help="per-epoch history CSV")
    p.add_argument("--classes", help="comma-separated class order (default: sorted labels)")
    p.add_argument("--root", help="directory image paths are relative to (default: manifest dir)")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--max-lr", type=float, default=1e-4)
    p.add_argument("--weight-decay", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--augment", action="store_true", help="random crop + rotation per epoch")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_finetune)

    p = add("classify", "classify PNG images")
    p.add_argument("--model", required=True)
    p.add_argument("--classes")
    p.add_argument("images", nargs="+")
    p.set_defaults(func=_cmd_classify)

    p = add("evaluate", "confusion matrix and per-class metrics on a manifest")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--classes")
    p.add_argument("--root")
    p.add_argument("--mode", choices=("macro", "micro"), default="macro")
    p.set_defaults(func=_cmd_evaluate)

    p = add("footprint", "parameter count and memory footprint")
    p.add_argument("--arch", default="mobilenet_v2")
    p.add_argument("--classes", type=int, default=1000)
    p.add_argument("--width", type=float, default=1.0)
    p.add_argument("--bytes-per-param", type=int, default=4)
    p.add_argument("--compare", action="store_true", help="append the reported comparison models")
    p.set_defaults(func=_cmd_footprint)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    if not logging.getLogger().handlers:
        logging.basicConfig(level=logging.INFO, format="lungline: %(message)s", stream=sys.stderr)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            report = args.func(args)
        if report is not None:
            _emit(report, args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"lungline {args.command}: {exc}", file=sys.stderr)
        return 2
    except (LunglineError, OSError, KeyError, ValueError) as exc:
        print(f"lungline {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
