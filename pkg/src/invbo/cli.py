"""Command-line interface.

Subcommands
-----------
run-synthetic   benchmark strategies on the triangle or sphere problem
import-dataset  start an ask/tell session from a pool CSV and a target CSV
ask             propose the next pool point of a session
tell            record the measured output for the pending proposal
export-trace    write a session's trace (and optionally its data) to files

Exit status is 0 on success, 2 for usage errors, 3 for unreadable or
inconsistent files and 4 for numerical failures.
"""
from __future__ import annotations

import argparse
import contextlib
import fcntl
import json
import os
import sys

import numpy as np

from . import formats, loop
from .errors import DataError, InvalidArgumentError, NumericalError
from .oracles import DEFAULT_NOISE_VAR, OracleKind

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

STRATEGIES = [s.value for s in loop.Strategy]


class UsageError(Exception):
    """Arguments are well-formed but not acceptable in the current state."""


def _bool(text):
    v = text.strip().lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _nonneg_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {v}")
    return v


def _nonneg_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not np.isfinite(v) or v < 0:
        raise argparse.ArgumentTypeError(f"expected a finite non-negative number, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="invbo", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    rs = sub.add_parser("run-synthetic", help="benchmark strategies on a synthetic problem")
    rs.add_argument("--problem", required=True, choices=[k.value for k in OracleKind])
    rs.add_argument("--strategy", nargs="+", default=STRATEGIES, choices=STRATEGIES,
                    help="one or more strategies (default: all four)")
    rs.add_argument("--budget", type=_positive_int, default=30)
    rs.add_argument("--trials", type=_positive_int, default=10)
    rs.add_argument("--seed", type=_nonneg_int, default=0)
    rs.add_argument("--pool-size", type=_positive_int, default=100)
    rs.add_argument("--init-size", type=_positive_int, default=2)
    rs.add_argument("--noise-var", type=_nonneg_float, default=DEFAULT_NOISE_VAR)
    rs.add_argument("--include-noise", type=_bool, default=True)
    rs.add_argument("--out-dir", required=True)

    im = sub.add_parser("import-dataset", help="create an ask/tell session from CSV files")
    im.add_argument("pool", help="CSV with columns x_1..x_d,y_1..y_M; rows with outputs "
                                 "filled are the initial observations")
    im.add_argument("target", help="CSV with columns y_1..y_M and one row")
    im.add_argument("--state", required=True, help="session file to create")
    im.add_argument("--strategy", default="ei", choices=STRATEGIES)
    im.add_argument("--budget", type=_positive_int, default=30)
    im.add_argument("--seed", type=_nonneg_int, default=0)
    im.add_argument("--include-noise", type=_bool, default=True)
    im.add_argument("--force", action="store_true", help="overwrite an existing session file")

    ask = sub.add_parser("ask", help="propose the next input")
    ask.add_argument("--state", required=True)

    tell = sub.add_parser("tell", help="record the output measured at the pending input")
    tell.add_argument("--state", required=True)
    tell.add_argument("y", nargs="+", help="observed output vector, M numbers")

    ex = sub.add_parser("export-trace", help="write a session's trace as JSON lines")
    ex.add_argument("--state", required=True)
    ex.add_argument("--out", help="trace file (default: standard output)")
    ex.add_argument("--dataset-out", help="also write the pool and observations as CSV")
    ex.add_argument("--target-out", help="also write the target as CSV")
    return p


# ---------------------------------------------------------------------------
# session files


@contextlib.contextmanager
def locked(path):
    """Exclusive advisory lock on ``path`` for the duration of a command.

    The lock lives on a sibling ``.lock`` file because the session itself is
    replaced by rename on save.
    """
    fd = os.open(os.fspath(path) + ".lock", os.O_RDWR | os.O_CREAT, 0o644)
    try:
        fcntl.flock(fd, fcntl.LOCK_EX)
        yield
    finally:
        fcntl.flock(fd, fcntl.LOCK_UN)
        os.close(fd)


def load_learner(path) -> loop.Learner:
    state = formats.load_session(formats.read_text(path))
    try:
        return loop.Learner.from_state_dict(state)
    except (KeyError, TypeError) as exc:
        raise DataError(f"{path}: malformed session ({exc!r})", line=0) from None
    except InvalidArgumentError as exc:
        raise DataError(f"{path}: inconsistent session ({exc})", line=0) from None


def save_learner(path, learner: loop.Learner) -> None:
    formats.write_text_atomic(path, formats.dump_session(learner.state_dict()))


def _print_json(obj, out):
    out.write(loop.dumps(obj) + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_run_synthetic(args, out=sys.stdout) -> int:
    kind = OracleKind(args.problem)
    strategies = list(dict.fromkeys(args.strategy))
    os.makedirs(os.path.join(args.out_dir, "traces"), exist_ok=True)
    config = {
        "problem": kind.value,
        "strategies": strategies,
        "budget": args.budget,
        "trials": args.trials,
        "seed": args.seed,
        "pool_size": args.pool_size,
        "init_size": args.init_size,
        "noise_var": args.noise_var,
        "include_noise": args.include_noise,
    }
    formats.write_text_atomic(os.path.join(args.out_dir, "config.json"),
                              json.dumps(config, sort_keys=True, indent=1) + "\n")

    def factory(trial_seed):
        return loop.synthetic_trial(kind, trial_seed, args.pool_size, args.init_size,
                                    noise_var=args.noise_var)

    def trace_path(k, s):
        return os.path.join(args.out_dir, "traces", f"{s.value}_trial{k:03d}.jsonl")

    def progress(k, s, trace):
        formats.write_text_atomic(trace_path(k, s), trace.to_jsonl())

    try:
        result = loop.benchmark(
            strategies, factory, args.trials, args.budget, base_seed=args.seed,
            config_overrides={"include_noise": args.include_noise}, progress=progress,
        )
    except loop.LoopAborted as exc:
        partial = os.path.join(args.out_dir, "traces", "aborted.jsonl")
        formats.write_text_atomic(partial, exc.trace.to_jsonl())
        raise NumericalError(f"{exc}; partial trace written to {partial}") from exc
    summary = os.path.join(args.out_dir, "summary.csv")
    formats.write_text_atomic(summary, formats.format_summary_csv(result.rows()))
    for s in result.strategies:
        out.write(f"{s.value}: mean log10 regret {result.mean[s][0]:.3f} -> "
                  f"{result.mean[s][-1]:.3f} over {args.budget} iterations\n")
    out.write(f"summary written to {summary}\n")
    return EXIT_OK


def cmd_import_dataset(args, out=sys.stdout) -> int:
    table = formats.parse_dataset_csv(formats.read_text(args.pool))
    target = formats.parse_target_csv(formats.read_text(args.target))
    if target.size != table.output_dim:
        raise DataError(f"target has {target.size} outputs but the dataset has "
                        f"{table.output_dim}", line=2)
    initial = np.flatnonzero(table.observed)
    if initial.size == 0:
        raise DataError("no initial observations: fill the y columns of at least one row", line=0)
    if initial.size == table.X.shape[0]:
        raise DataError("every row is already observed; nothing left to query", line=0)
    if os.path.exists(args.state) and not args.force:
        raise UsageError(f"{args.state} exists; pass --force to overwrite it")
    config = loop.LoopConfig(
        strategy=loop.Strategy(args.strategy),
        budget=args.budget,
        pool=table.X,
        initial_indices=tuple(int(i) for i in initial),
        seed=args.seed,
        include_noise=args.include_noise,
    )
    with locked(args.state):
        learner = loop.Learner(config, target, table.Y[initial])
        save_learner(args.state, learner)
    _print_json({
        "pool_size": int(table.X.shape[0]),
        "observed": int(initial.size),
        "unqueried": int(learner.candidates().size),
        "input_dim": table.input_dim,
        "output_dim": table.output_dim,
        "incumbent_value": learner.incumbent_value,
    }, out)
    return EXIT_OK


def cmd_ask(args, out=sys.stdout) -> int:
    with locked(args.state):
        learner = load_learner(args.state)
        if learner.pending is not None:
            raise UsageError(
                f"a proposal (pool index {learner.pending.index}) is already pending; "
                "run tell with its measured output first"
            )
        if learner.done:
            raise UsageError("the session's budget is spent or its pool is exhausted")
        p = learner.propose()
        save_learner(args.state, learner)
    _print_json({"iteration": learner.iteration + 1, "index": p.index, "x": list(p.x),
                 "acquisition": p.acquisition}, out)
    return EXIT_OK


def cmd_tell(args, out=sys.stdout) -> int:
    try:
        y = np.array([float(v) for v in args.y])
    except ValueError as exc:
        raise InvalidArgumentError(f"observation is not numeric: {exc}") from None
    with locked(args.state):
        learner = load_learner(args.state)
        if learner.pending is None:
            raise UsageError("no pending proposal; run ask first")
        rec = learner.tell(y)  # raises before mutating on a bad vector
        save_learner(args.state, learner)
    _print_json({
        "iteration": rec.iteration,
        "objective": rec.objective,
        "incumbent_value": rec.incumbent_value,
        "incumbent_index": rec.incumbent_index,
        "incumbent_x": list(learner.config.pool[rec.incumbent_index]),
        "log10_regret": float(loop.log_regret(rec.incumbent_value)),
        "converged": rec.incumbent_value == 0.0,
        "done": learner.done,
    }, out)
    return EXIT_OK


def cmd_export_trace(args, out=sys.stdout) -> int:
    with locked(args.state):
        learner = load_learner(args.state)
    text = learner.trace.to_jsonl()
    if args.out:
        formats.write_text_atomic(args.out, text)
    else:
        out.write(text)
    if args.dataset_out:
        pool = learner.config.pool
        Y = np.full((pool.shape[0], learner.target.dim), np.nan)
        Y[learner.queried] = learner.dataset.Y
        observed = np.zeros(pool.shape[0], bool)
        observed[learner.queried] = True
        formats.write_text_atomic(args.dataset_out,
                                  formats.format_dataset_csv(pool, Y, observed))
    if args.target_out:
        formats.write_text_atomic(args.target_out, formats.format_target_csv(learner.target.values))
    return EXIT_OK


COMMANDS = {
    "run-synthetic": cmd_run_synthetic,
    "import-dataset": cmd_import_dataset,
    "ask": cmd_ask,
    "tell": cmd_tell,
    "export-trace": cmd_export_trace,
}


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args, out)
    except (UsageError, InvalidArgumentError, loop.PendingProposalError,
            loop.NoPendingProposalError) as exc:
        err.write(f"invbo {args.command}: error: {exc}\n")
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        err.write(f"invbo {args.command}: data error: {exc}\n")
        return EXIT_DATA
    except (NumericalError, loop.LoopAborted) as exc:
        err.write(f"invbo {args.command}: numerical failure: {exc}\n")
        return EXIT_NUMERICAL


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
