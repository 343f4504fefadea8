"""Command-line entry point: ``leap {synth,split,anchors,train,eval}``.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .anchors import STRATEGIES, AnchorSet, select_anchors
from .autodiff import load_checkpoint, save_checkpoint
from .evaluation import evaluate, summarize
from .graph import INDUCTIVE, TRANSDUCTIVE, GraphError, Split, SplitSpec, make_split
from .io import (
    ConfigError, DataError, DatasetBundle, apply_config, load_dataset, read_config,
    write_config, write_dataset, write_json,
)
from .model import AUGMENT_MODES, ModelParams
from .synth import sbm_graph
from .training import TrainConfig, train

log = logging.getLogger("leap")

MODES = {"inductive": INDUCTIVE, "transductive": TRANSDUCTIVE, INDUCTIVE: INDUCTIVE, TRANSDUCTIVE: TRANSDUCTIVE}
EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


@dataclass
class RunConfig:
    """Settings around training: which data, which split, how many runs."""

    data: str = ""
    mode: str = "inductive"
    split_seed: int = 0
    runs: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {sorted(MODES)}")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _load(data: str):
    if not data:
        raise ConfigError("no dataset given (use --data DIR)")
    bundle = DatasetBundle.from_dir(data)
    return bundle, load_dataset(bundle)


def _split(g, mode: str, seed: int) -> Split:
    try:
        return make_split(g, SplitSpec(mode=MODES[mode], seed=seed))
    except GraphError as exc:
        raise DataError(str(exc)) from exc


def _emit(obj, out: str | None) -> None:
    if out:
        write_json(out, obj)
    else:
        print(json.dumps(obj, indent=2))


def cmd_synth(args) -> int:
    g, block = sbm_graph(args.nodes, args.blocks, args.p_in, args.p_out, args.noise, args.seed)
    out = Path(args.out)
    write_dataset(g, out)
    (out / "blocks.txt").write_text("".join(f"{i} {b}\n" for i, b in enumerate(block.tolist())))
    print(f"wrote {g.num_nodes} nodes, {g.num_edges} edges to {out}")
    return EXIT_OK


def cmd_split(args) -> int:
    _, g = _load(args.data)
    split = _split(g, args.mode, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(out / "train_nodes.txt", split.train_nodes, fmt="%d")
    for name, items in (("valid", split.valid), ("test", split.test)):
        np.savetxt(out / f"{name}_edges.txt", items.edges, fmt="%d")
        if split.inductive:
            np.savetxt(out / f"{name}_nodes.txt", items.nodes, fmt="%d")
    write_json(out / "split.json", {
        "mode": split.spec.mode,
        "seed": split.spec.seed,
        "fractions": list(split.spec.fractions),
        "train_nodes": len(split.train_nodes),
        "train_edges": split.train_graph.num_edges,
        "valid_edges": len(split.valid.edges),
        "test_edges": len(split.test.edges),
        "dropped_pairs": split.dropped_pairs,
    })
    return EXIT_OK


def cmd_anchors(args) -> int:
    _, g = _load(args.data)
    anchors = select_anchors(g, args.strategy, args.k, args.seed)
    _emit([int(a) for a in anchors.anchors], args.out)
    return EXIT_OK


def _resolve(args) -> tuple[RunConfig, TrainConfig]:
    file_values = read_config(args.config) if args.config else {}
    run_keys = {f.name for f in dataclasses.fields(RunConfig)}
    run_values = {k: v for k, v in file_values.items() if k in run_keys}
    train_values = {k: v for k, v in file_values.items() if k not in run_keys}
    run_cfg = apply_config(RunConfig, run_values, RunConfig())
    train_cfg = apply_config(TrainConfig, train_values, TrainConfig())
    overrides = {k: v for k, v in vars(args).items() if v is not None}
    try:
        run_cfg = dataclasses.replace(run_cfg, **{k: v for k, v in overrides.items() if k in run_keys})
        train_keys = {f.name for f in dataclasses.fields(TrainConfig)}
        train_cfg = dataclasses.replace(train_cfg, **{k: v for k, v in overrides.items() if k in train_keys})
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return run_cfg, train_cfg


def cmd_train(args) -> int:
    run_cfg, train_cfg = _resolve(args)
    bundle, g = _load(run_cfg.data)
    split = _split(g, run_cfg.mode, run_cfg.split_seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for r in range(run_cfg.runs):
        cfg = dataclasses.replace(train_cfg, seed=train_cfg.seed + r)
        run_dir = out / f"run_{r}"
        run_dir.mkdir(exist_ok=True)
        write_config(run_dir / "config.txt", {**dataclasses.asdict(run_cfg), **cfg.to_dict()})
        result = train(split, cfg)
        save_checkpoint(run_dir / "model.ckpt", result.params.state())
        write_json(run_dir / "anchors.json", [int(a) for a in result.anchors.anchors])
        lines = "".join(json.dumps(rec) + "\n" for rec in result.history)
        (run_dir / "train_log.jsonl").write_text(lines)
        reports.append(evaluate(result.params, split, split.test, result.anchors, seed=cfg.seed, augment=cfg.augment))
        log.info("run %d: best epoch %d, test auc %.4f", r, result.best_epoch, reports[-1].auc)
    write_config(out / "config.txt", {**dataclasses.asdict(run_cfg), **train_cfg.to_dict()})
    write_json(out / "metrics.json", summarize(reports, bundle.name, MODES[run_cfg.mode]))
    return EXIT_OK


def _run_dirs(path: Path) -> list[Path]:
    if path.is_file():
        return [path.parent]
    if (path / "model.ckpt").is_file():
        return [path]
    runs = sorted((p for p in path.glob("run_*") if (p / "model.ckpt").is_file()),
                  key=lambda p: int(p.name.split("_")[1]))
    if not runs:
        raise ConfigError(f"no model.ckpt under {path}")
    return runs


def cmd_eval(args) -> int:
    ckpt = Path(args.checkpoint)
    if not ckpt.exists():
        raise ConfigError(f"checkpoint {ckpt} does not exist")
    reports, dataset, mode = [], None, None
    for run_dir in _run_dirs(ckpt):
        values = read_config(run_dir / "config.txt")
        run_keys = {f.name for f in dataclasses.fields(RunConfig)}
        run_cfg = apply_config(RunConfig, {k: v for k, v in values.items() if k in run_keys})
        if args.data:
            run_cfg = dataclasses.replace(run_cfg, data=args.data)
        cfg = apply_config(TrainConfig, {k: v for k, v in values.items() if k not in run_keys})
        bundle, g = _load(run_cfg.data)
        split = _split(g, run_cfg.mode, run_cfg.split_seed)
        anchors = AnchorSet(tuple(json.loads((run_dir / "anchors.json").read_text())), cfg.anchor_strategy, cfg.seed)
        params = ModelParams(cfg.model_config(split.train_graph, len(anchors)), seed=cfg.seed)
        try:
            params.load_state(load_checkpoint(run_dir / "model.ckpt"))
        except (KeyError, ValueError) as exc:
            raise DataError(f"{run_dir / 'model.ckpt'}: {exc}") from exc
        items = split.valid if args.on == "valid" else split.test
        reports.append(evaluate(params, split, items, anchors, seed=cfg.seed, augment=args.augment or cfg.augment))
        dataset, mode = bundle.name, MODES[run_cfg.mode]
    _emit(summarize(reports, dataset, mode), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="leap", description="Inductive link prediction with learned anchor edges.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="write the seeded two-block SBM benchmark")
    s.add_argument("--out", required=True, help="output dataset directory")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--nodes", type=int, default=400)
    s.add_argument("--blocks", type=int, default=2)
    s.add_argument("--p-in", type=float, default=0.05)
    s.add_argument("--p-out", type=float, default=0.005)
    s.add_argument("--noise", type=float, default=0.5)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("split", help="write train/valid/test partition files")
    s.add_argument("--data", required=True, help="dataset directory")
    s.add_argument("--out", required=True)
    s.add_argument("--mode", choices=sorted(MODES), default="inductive")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("anchors", help="print the selected anchor ids as JSON")
    s.add_argument("--data", required=True, help="dataset directory")
    s.add_argument("--strategy", choices=STRATEGIES, default="auto")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="write JSON here instead of stdout")
    s.set_defaults(func=cmd_anchors)

    s = sub.add_parser("train", help="train, checkpoint and log one or more runs")
    s.add_argument("--data", help="dataset directory")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--config", help="key=value file; flags override it")
    s.add_argument("--mode", choices=sorted(MODES))
    s.add_argument("--split-seed", type=int)
    s.add_argument("--runs", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--epochs", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--gamma", type=float)
    s.add_argument("--q", type=int)
    s.add_argument("--k", type=int)
    s.add_argument("--holdout", type=int)
    s.add_argument("--anchor-strategy", choices=STRATEGIES)
    s.add_argument("--augment", choices=AUGMENT_MODES)
    s.add_argument("--hidden", type=int)
    s.add_argument("--layers", type=int)
    s.add_argument("--patience", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="evaluate saved checkpoints and print metrics JSON")
    s.add_argument("--checkpoint", required=True, help="model.ckpt, a run directory, or a train --out directory")
    s.add_argument("--data", help="dataset directory (defaults to the one recorded at training time)")
    s.add_argument("--on", choices=("valid", "test"), default="test")
    s.add_argument("--augment", choices=AUGMENT_MODES)
    s.add_argument("--out", help="write JSON here instead of stdout")
    s.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    func = args.func
    del args.func, args.command, args.verbose
    try:
        return func(args)
    except ConfigError as exc:
        print(f"leap: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, GraphError) as exc:
        print(f"leap: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
