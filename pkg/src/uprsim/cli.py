"""Command-line interface.

Subcommands:
  simulate   - run all configured modes, write frames_<mode>.csv + summary.csv
  sweep      - run a parameter sweep, write sweep.csv
  truthtable - print dual-thresholding decisions for a scripted input set
  gen-trace  - generate a synthetic head trace and write it as CSV

Exit code 0 on success, nonzero with a message on any config/IO error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import scheduler as sched
from .harness import (
    ConfigError,
    ExperimentConfig,
    run,
    sweep,
    write_outputs,
    write_sweep_csv,
)
from .tracksim import generate_trace, write_trace_csv


def _cmd_simulate(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    result = run(config)
    write_outputs(result, args.out)
    for s in result.summaries.values():
        err = f"mean error {s.mean_error_mm:.2f} mm"
        if config.errors_px_per_mm > 0:
            err += f" ({s.mean_error_mm * config.errors_px_per_mm:.1f} px)"
        print(f"{s.mode}: {err}, "
              f"{s.invocations} face-tracker invocations, "
              f"tracking {s.total_tracking_ms:.1f} ms")
    return 0


def _cmd_sweep(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    values = [float(v) for v in args.values.split(",")]
    rows = sweep(config, args.param, values)
    import os
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "sweep.csv")
    write_sweep_csv(rows, args.param, path)
    print(f"wrote {len(rows)} rows to {path}")
    return 0


#: Scripted eye-pixel inputs exercising each decision path: stationary hold,
#: a jump past the spatial threshold, settling (refine), and a flow failure.
_TRUTHTABLE_SCRIPT = [
    [[100.0, 100.0], [160.0, 100.0]],
    [[100.0, 100.0], [160.0, 100.0]],
    [[100.0, 100.0], [160.0, 100.0]],
    [[140.0, 100.0], [200.0, 100.0]],  # jump: spatial trigger
    [[141.0, 100.0], [201.0, 100.0]],  # settling: refine trigger once imprecise
    [[141.5, 100.0], [201.5, 100.0]],
    None,                              # flow failure
    [[141.5, 100.0], [201.5, 100.0]],
]


def _cmd_truthtable(args) -> int:
    cfg = sched.ThresholdConfig(eps_max_px=args.eps)
    state = sched.initial_state(cfg)
    print(f"eps = {args.eps} px, refine factor = {cfg.refine_factor}, policy = verbatim")
    print(f"{'frame':>5} {'E_px':>8} {'dE_px':>8} {'decision':>12} {'reason':>12}")
    for i, flow in enumerate(_TRUTHTABLE_SCRIPT):
        decision, state = sched.step(state, flow, cfg)
        if decision.kind is sched.DecisionKind.RECALCULATE:
            eyes = np.asarray(flow, dtype=float) if flow is not None else state.pos_eye_calc
            if eyes is None:  # failure before any recomputation
                eyes = np.zeros((2, 2))
            state = sched.apply_recalculation(state, eyes, cfg)
        e = "-" if np.isnan(decision.e_px) else f"{decision.e_px:.2f}"
        de = "-" if np.isnan(decision.delta_e_px) else f"{decision.delta_e_px:.2f}"
        reason = decision.reason.value if decision.reason else "-"
        print(f"{i:>5} {e:>8} {de:>8} {decision.kind.value:>12} {reason:>12}")
    return 0


def _cmd_gen_trace(args) -> int:
    config = ExperimentConfig.from_file(args.spec)
    trace = config.build_trace()
    write_trace_csv(trace, args.out)
    print(f"wrote {len(trace)} frames to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uprsim", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run all configured render modes")
    p.add_argument("--config", required=True, help="flat key = value config file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="run a parameter sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--param", required=True, choices=["eps_max", "jitter_sigma", "head_displacement"])
    p.add_argument("--values", required=True, help="comma-separated numeric values")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("truthtable", help="print dual-thresholding decisions for a scripted input")
    p.add_argument("--eps", type=float, required=True, help="spatial threshold in px")
    p.set_defaults(func=_cmd_truthtable)

    p = sub.add_parser("gen-trace", help="generate a synthetic head trace CSV")
    p.add_argument("--spec", required=True, help="config file holding the trace_* keys")
    p.add_argument("--out", required=True, help="output trace CSV path")
    p.set_defaults(func=_cmd_gen_trace)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
