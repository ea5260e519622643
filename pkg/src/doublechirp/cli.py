"""Command line entry point: ``doublechirp <command> [options]``.

Exit status is 0 on success, 1 on a configuration error and 2 on an I/O
error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .channel import synthesize, write_stream
from .errors import ConfigurationError, DoubleChirpError
from .figures import FIGURES
from .harness import (SimConfig, _TrialRunner, default_threads, emit_csv, load_config,
                      run_experiment, snr_to_noise_var)
from .preamble import AssignmentPlan, validate_assignment
from .scenarios import SCENARIOS

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(top):
    # global flags are accepted before or after the command; the copy on the
    # subcommands must not overwrite values given before it
    d = (lambda v: v) if top else (lambda v: argparse.SUPPRESS)
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, default=d(None), help="key = value config file")
    p.add_argument("--seed", type=int, default=d(None), help="master seed override")
    p.add_argument("--trials", type=int, default=d(None),
                   help="trials per SNR point override")
    p.add_argument("--out", type=Path, default=d(None), help="output file or directory")
    p.add_argument("--threads", type=int, default=d(1),
                   help="worker processes (0 = one per CPU)")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common(False)
    parser = _Parser(prog="doublechirp", description=__doc__.splitlines()[0],
                     parents=[_common(True)])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("run", parents=[common], help="PER experiment from a config file")
    sc = sub.add_parser("scenario", parents=[common], help="named reproduction")
    sc.add_argument("name", choices=sorted(FIGURES) + sorted(SCENARIOS))
    ds = sub.add_parser("dump-stream", parents=[common],
                        help="write one trial's reception stream")
    ds.add_argument("--snr", type=float, default=0.0, help="SNR in dB")
    ds.add_argument("--trial", type=int, default=0, help="trial index")
    vp = sub.add_parser("validate-plan", parents=[common], help="check a chirp-pair plan")
    vp.add_argument("plan", type=Path)
    return parser


def _config(args) -> SimConfig:
    config = load_config(args.config) if args.config else SimConfig()
    if args.seed is not None:
        config = config.replace(master_seed=args.seed)
    if args.trials is not None:
        config = config.replace(trials=args.trials)
    return config.validate()


def _threads(args) -> int:
    if args.threads < 0:
        raise ConfigurationError(f"--threads must be non-negative, got {args.threads}")
    return args.threads or default_threads()


def cmd_run(args) -> int:
    config = _config(args)
    result = run_experiment(config, threads=_threads(args), progress=print)
    out = args.out or Path("per.csv")
    emit_csv(result, out)
    print(f"wrote {out}; SNR at PER 1e-3: {result.crossing():.2f} dB")
    return EXIT_OK


def cmd_scenario(args) -> int:
    name = args.name
    if name in SCENARIOS:
        result = SCENARIOS[name](seed=args.seed or 0)
        print(result.summary())
        if args.out:
            header = ",".join(f"z_ed{a.ed_id}" for a in result.plan)
            np.savetxt(args.out, result.series, delimiter=",", header=header, comments="")
            print(f"wrote {args.out}")
        return EXIT_OK if result.passed else EXIT_CONFIG
    kwargs = {"seed": args.seed or 0}
    if args.trials is not None:
        kwargs["trials"] = args.trials
    out = args.out or Path(name)
    out.mkdir(parents=True, exist_ok=True)
    for label, config in FIGURES[name](**kwargs):
        result = run_experiment(config, threads=_threads(args),
                                progress=lambda m, lb=label: print(f"[{lb}] {m}"))
        path = out / f"{name}_{label}.csv"
        emit_csv(result, path)
        print(f"[{label}] wrote {path}; SNR at PER 1e-3: {result.crossing():.2f} dB")
    return EXIT_OK


def cmd_dump_stream(args) -> int:
    config = _config(args)
    runner = _TrialRunner(config)
    packets, channels, t, rng = runner.draw(args.trial)
    stream = synthesize(packets, channels, snr_to_noise_var(args.snr), config.l_antennas, t,
                        runner.table, config.n_preamble, rng)
    out = args.out or Path("stream.bin")
    write_stream(stream, out)
    for p in packets:
        print(f"ED {p.ed_id}: toa={p.toa} pair=({p.assignment.kappa1}, "
              f"{p.assignment.kappa2}) payload={len(p.payload_symbols)} symbols")
    print(f"wrote {out}: L={stream.n_antennas} T={stream.length}")
    return EXIT_OK


def cmd_validate_plan(args) -> int:
    plan = AssignmentPlan.from_text(args.plan.read_text())
    problems = validate_assignment(plan)
    for msg in problems:
        print(msg)
    if problems:
        return EXIT_CONFIG
    print(f"plan OK: {len(plan)} EDs, M={plan.m}")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "scenario": cmd_scenario,
    "dump-stream": cmd_dump_stream,
    "validate-plan": cmd_validate_plan,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, DoubleChirpError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
