"""Command-line entry point: ``irslink <command> [options]``.

Failures print one JSON object to stderr and exit with a nonzero status:
2 for configuration and parameter errors, 3 for numerical failures, 1 otherwise.
"""

import argparse
import json
import sys
from pathlib import Path

from .config import ExperimentConfig, default_config, load_config
from .errors import ConfigError, NumericalError, ParameterError
from .experiments import (
    METHODS,
    cmd_channel_stats,
    cmd_ddpg_sweep,
    cmd_ddpg_train,
    cmd_outage_sweep,
    write_table,
)


class _Parser(argparse.ArgumentParser):
    # usage errors go through the JSON error path like every other failure
    def error(self, message):
        raise ParameterError(message)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="irslink", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("channel-stats", "sample correlations of drawn coefficients"),
        ("outage-sweep", "outage probability over the transmit-power grid"),
        ("ddpg-train", "train one agent and record its reward trace"),
        ("ddpg-sweep", "train agents over several realizations and score outage"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="YAML experiment file (defaults if omitted)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--workers", type=int, default=1, help="worker processes")
        if name == "outage-sweep":
            p.add_argument("--method", choices=METHODS, default="both")
    return parser


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.workers < 1:
        raise ParameterError("--workers must be at least 1")
    return cfg


def _run(args) -> list:
    cfg = _load(args)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(table, filename):
        path = out / filename
        write_table(table, path)
        written.append(str(path))

    if args.command == "channel-stats":
        emit(cmd_channel_stats(cfg, workers=args.workers), "channel_stats.csv")
    elif args.command == "outage-sweep":
        emit(cmd_outage_sweep(cfg, args.method, workers=args.workers), "outage_sweep.csv")
    elif args.command == "ddpg-train":
        result = cmd_ddpg_train(cfg)
        emit(result.episodes, "ddpg_train.csv")
        agent = result.result.report.agent
        for net, filename in ((agent.actor_target, "actor_target.bin"), (agent.critic_target, "critic_target.bin")):
            net.save(out / filename)
            written.append(str(out / filename))
        rep = result.result.report
        summary = {
            "runtime_s": rep.runtime,
            "optimal_gain": rep.optimal_gain,
            "eval_ratio": result.result.eval_ratio,
            "clip_events": rep.clip_events,
            "diverged": rep.diverged,
            "diagnostic": rep.diagnostic,
        }
        (out / "ddpg_train.json").write_text(json.dumps(summary, indent=2) + "\n")
        written.append(str(out / "ddpg_train.json"))
    elif args.command == "ddpg-sweep":
        result = cmd_ddpg_sweep(cfg, workers=args.workers)
        emit(result.sweep, "ddpg_sweep.csv")
        emit(result.realizations, "ddpg_realizations.csv")
        emit(result.trace, "ddpg_trace.csv")
        summary = {
            "runtime_s": result.runtime,
            "kendall_tau_gap_vs_p_s": {str(k): v for k, v in result.kendall_tau.items()},
        }
        (out / "ddpg_sweep.json").write_text(json.dumps(summary, indent=2) + "\n")
        written.append(str(out / "ddpg_sweep.json"))
    return written


def _error_payload(exc: Exception) -> tuple[int, dict]:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        payload.update(field=exc.field, line=exc.line)
        return 2, payload
    if isinstance(exc, NumericalError):
        payload["achieved_tol"] = exc.achieved_tol
        return 3, payload
    if isinstance(exc, (ParameterError, OSError)):
        return 2, payload
    return 1, payload


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        for path in _run(args):
            print(path)
    except Exception as exc:  # reported as JSON, never as a traceback
        code, payload = _error_payload(exc)
        print(json.dumps(payload), file=sys.stderr)
        return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
