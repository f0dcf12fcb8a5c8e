"""Command-line entry point: ``asknav train|eval|table|selftest``.

Errors print one line ``asknav: error[CODE]: message`` to stderr and exit
nonzero (2 for usage problems, 1 otherwise).
"""
from __future__ import annotations

import argparse
import json
import sys
from collections import defaultdict
from typing import Optional, Sequence

import numpy as np

from .checkpoint import CheckpointError, CorruptCheckpoint, VersionMismatch, load_checkpoint
from .config import ConfigParseError, ConfigValueError, RunConfig, load_config
from .curriculum import EvalRow, comparison_table, evaluate, to_csv
from .trainer import run_split, train


class CliError(Exception):
    def __init__(self, code: str, message: str, status: int = 1):
        super().__init__(message)
        self.code, self.status = code, status


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would print usage over several lines
        raise CliError("USAGE", message, 2)


def _positive(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {n}")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="asknav", description="Ask-for-feedback ObjectNav in a grid world.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train an agent with PPO")
    t.add_argument("--config", help="dotted key-value config file")
    t.add_argument("--seed", type=int)
    t.add_argument("--out", help="output directory (default: output_dir from config)")
    t.add_argument("--method", choices=["baseline", "feedback", "semi"])
    t.add_argument("--eta", type=float, help="teacher presence percentage for --method semi")
    t.add_argument("--iterations", type=int, help="override curriculum.total_iterations")
    t.add_argument("--resume", help="checkpoint to resume from")
    t.add_argument("--sparse-reward", action="store_true", help="disable geodesic shaping")
    t.add_argument("--export-json", action="store_true", help="also write final weights as JSON")
    t.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="extra config override")

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--presence", choices=["present", "absent"], default="absent")
    e.add_argument("--split", choices=["seen", "unseen"], default="seen")
    e.add_argument("--episodes", type=_positive, default=500)
    e.add_argument("--seed", type=int, default=None)
    e.add_argument("--greedy", action="store_true")
    e.add_argument("--format", choices=["csv", "json"], default="csv")

    tb = sub.add_parser("table", help="presence x method comparison over checkpoints")
    tb.add_argument("--checkpoints", nargs="+", required=True, metavar="METHOD=PATH",
                    help="repeat a method label to average over seeds")
    tb.add_argument("--episodes", type=_positive, default=500)
    tb.add_argument("--seed", type=int, default=None)
    tb.add_argument("--all", action="store_true", help="evaluate every presence for every method")
    tb.add_argument("--format", choices=["csv", "text"], default="text")

    sub.add_parser("selftest", help="run the built-in oracle checks")
    return p


def _overrides(args) -> dict:
    out = {"seed": args.seed, "curriculum.method": args.method, "curriculum.eta_percent": args.eta,
           "curriculum.total_iterations": args.iterations}
    if args.sparse_reward:
        out["reward.shaping_coef"] = 0.0
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise CliError("USAGE", f"--set expects KEY=VALUE, got {item!r}", 2)
        out[key.strip()] = value.strip()
    return out


def _cmd_train(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    result = train(cfg, args.out, resume=args.resume, export_weights_json=args.export_json)
    print(f"trained {result.checkpoint.iteration} iterations -> {result.final_path}")
    return 0


def _load(path: str):
    try:
        ckpt = load_checkpoint(path)
    except FileNotFoundError:
        raise CliError("NO_FILE", f"no such checkpoint: {path}") from None
    cfg = RunConfig.from_dict(ckpt.config) if ckpt.config else RunConfig()
    return ckpt, cfg


def _eval_row(ckpt, cfg: RunConfig, presence: bool, split: str, episodes: int, seed: int,
              greedy: bool, label: str) -> EvalRow:
    return evaluate(ckpt.policy(), run_split(cfg), presence, episodes, seed, split_name=split,
                    env_cfg=cfg.env, method=label, greedy=greedy)


def _cmd_eval(args) -> int:
    ckpt, cfg = _load(args.checkpoint)
    presence = args.presence == "present"
    if presence and ckpt.action_dim < 7:
        print("asknav: warning[NO_ASK]: checkpoint has no Ask action; presence forced absent", file=sys.stderr)
        presence = False
    seed = cfg.eval.seed if args.seed is None else args.seed
    row = _eval_row(ckpt, cfg, presence, args.split, args.episodes, seed, args.greedy,
                    cfg.curriculum_config.label)
    if args.format == "json":
        print(json.dumps(row.as_dict()))
    else:
        sys.stdout.write(to_csv([row]))
    return 0


def _presences(label: str, action_dim: int, all_cells: bool) -> list[bool]:
    if action_dim < 7:
        return [False]
    if all_cells or label not in ("Feedback",):
        return [False, True]
    return [True]


def table_reports(pairs: Sequence[tuple[str, str]], episodes: int, seed: Optional[int], all_cells: bool):
    grouped = defaultdict(list)
    for label, path in pairs:
        grouped[label].append(_load(path))
    reports = {}
    for label, runs in grouped.items():
        for presence in _presences(label, runs[0][0].action_dim, all_cells):
            for split in ("seen", "unseen"):
                rows = [
                    _eval_row(ckpt, cfg, presence, split, episodes,
                              cfg.eval.seed if seed is None else seed, cfg.eval.greedy, label)
                    for ckpt, cfg in runs
                ]
                reports[(label, presence, split)] = EvalRow(
                    label, presence, split,
                    float(np.mean([r.sr for r in rows])), float(np.mean([r.spl for r in rows])),
                    sum(r.n_episodes for r in rows),
                    float(np.mean([r.mean_len for r in rows])), float(np.mean([r.mean_asks for r in rows])),
                )
    return reports


def _cmd_table(args) -> int:
    pairs = []
    for item in args.checkpoints:
        label, sep, path = item.partition("=")
        if not sep or not label or not path:
            raise CliError("USAGE", f"expected METHOD=PATH, got {item!r}", 2)
        pairs.append((label, path))
    doc = comparison_table(table_reports(pairs, args.episodes, args.seed, args.all), include_all=args.all)
    sys.stdout.write(doc.csv if args.format == "csv" else doc.text)
    return 0


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return 0 if run_selftest() else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return {"train": _cmd_train, "eval": _cmd_eval, "table": _cmd_table,
                "selftest": _cmd_selftest}[args.command](args)
    except CliError as exc:
        code, status, msg = exc.code, exc.status, str(exc)
    except ConfigParseError as exc:
        code, status, msg = "CONFIG_PARSE", 2, str(exc)
    except ConfigValueError as exc:
        code, status, msg = "CONFIG_VALUE", 2, str(exc)
    except VersionMismatch as exc:
        code, status, msg = "CKPT_VERSION", 1, str(exc)
    except CorruptCheckpoint as exc:
        code, status, msg = "CKPT_CORRUPT", 1, str(exc)
    except CheckpointError as exc:
        code, status, msg = "CKPT", 1, str(exc)
    except FileNotFoundError as exc:
        code, status, msg = "NO_FILE", 1, f"{exc.filename}: not found"
    except (ValueError, FloatingPointError) as exc:
        code, status, msg = "INVALID", 1, str(exc)
    print(f"asknav: error[{code}]: {' '.join(msg.split())}", file=sys.stderr)
    return status


def cli_dispatch(argv: Sequence[str]) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
