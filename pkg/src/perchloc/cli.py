"""``pli`` command line: run, profile, oracle and evaluate.

Exit codes for ``run``: 0 Found, 2 NoViableBranch, 3 DegenerateTree,
1 on any error (bad arguments included).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import mechanics
from .graph import DroneSpec
from .mask_io import DEFAULT_TREE_HEIGHT_M
from .pipeline import (
    PipelineConfig,
    PipelineError,
    build_report,
    profile,
    run_pipeline,
    write_outputs,
    write_profile_csv,
)
from .windows import DEFAULT_SMOOTHING_PX

EXIT_ERROR = 1
SEED_ENV = "PLI_SEED"

log = logging.getLogger("perchloc")


class _Parser(argparse.ArgumentParser):
    # argparse's default usage exit code (2) would read as NoViableBranch
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _scales(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad scale list {text!r}") from None


def _add_tuning(p: argparse.ArgumentParser) -> None:
    d = DroneSpec()
    g = p.add_argument_group("drone and thresholds")
    g.add_argument("--alpha", type=float, default=d.alpha)
    g.add_argument("--lambda-angle", type=float, default=d.lambda_angle,
                   help="angle weight; the width weight is 1 minus this")
    g.add_argument("--claw-min-mm", type=float, default=d.claw_min_radius_mm,
                   help="smallest graspable branch radius")
    g.add_argument("--claw-max-mm", type=float, default=d.claw_max_radius_mm,
                   help="largest graspable branch radius")
    g.add_argument("--claw-width-mm", type=float, default=d.claw_width_mm)
    g.add_argument("--window-mm", type=float, default=d.window_mm)
    g.add_argument("--mass-kg", type=float, default=d.drone_mass_kg)
    g.add_argument("--prune-threshold", type=float, default=d.prune_threshold)
    g.add_argument("--max-theta-deg", type=float, default=30.0)
    g.add_argument("--smoothing-px", type=int, default=DEFAULT_SMOOTHING_PX)
    cal = p.add_mutually_exclusive_group()
    cal.add_argument("--tree-height-m", type=float, default=DEFAULT_TREE_HEIGHT_M)
    cal.add_argument("--mm-per-px", type=float, default=None,
                     help="explicit calibration of the full-resolution mask")
    p.add_argument("--skip-prune", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pli", description="Find a perch point on a segmented tree mask.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="locate a perch on one mask")
    run.add_argument("--mask", required=True)
    run.add_argument("--image", help="RGB image drawn under the overlay")
    run.add_argument("--scale", type=float, default=1.0)
    _add_tuning(run)
    run.add_argument("--out-json", help="write the report here instead of stdout")
    run.add_argument("--overlay", help="PNG overlay path")
    run.add_argument("--graph-dump", help="JSON-lines node/edge dump of the pruned graph")
    run.add_argument("--skeleton-pgm", help="16-bit PGM of skeleton distances x100")
    run.add_argument("--stress-check", action="store_true")
    run.add_argument("--lever-m", type=float, default=mechanics.DEFAULT_LEVER_M)
    run.add_argument("--mor-mpa", type=float, default=mechanics.DEFAULT_MOR_MPA)
    run.add_argument("--safety-factor", type=float, default=mechanics.DEFAULT_SAFETY_FACTOR)
    run.add_argument("--verbose-candidates", action="store_true")
    run.add_argument("--no-timings", action="store_true",
                     help="omit the timings block from the printed report")

    prof = sub.add_parser("profile", help="per-stage timings across scale factors")
    prof.add_argument("--mask", required=True)
    prof.add_argument("--scales", type=_scales, default=[1.0, 0.75, 0.5, 0.25])
    prof.add_argument("--out", required=True, help="CSV path")
    _add_tuning(prof)

    orc = sub.add_parser("oracle", help="write synthetic masks with ground truth")
    orc.add_argument("--seeds", type=int, required=True, help="number of trees")
    orc.add_argument("--out", required=True, help="output directory")
    orc.add_argument("--seed-base", type=int, default=None,
                     help=f"first seed (default ${SEED_ENV} or 0)")
    orc.add_argument("--no-ideal", action="store_true",
                     help="generate trees with nothing graspable")

    ev = sub.add_parser("evaluate", help="score the pipeline on an oracle directory")
    ev.add_argument("--dir", required=True)
    ev.add_argument("--out", required=True, help="CSV path")
    _add_tuning(ev)
    return parser


def _spec(args) -> DroneSpec:
    return DroneSpec(
        claw_min_radius_mm=args.claw_min_mm,
        claw_max_radius_mm=args.claw_max_mm,
        claw_width_mm=args.claw_width_mm,
        window_mm=args.window_mm,
        drone_mass_kg=args.mass_kg,
        alpha=args.alpha,
        lambda_angle=args.lambda_angle,
        lambda_width=round(1.0 - args.lambda_angle, 12),
        prune_threshold=args.prune_threshold,
    )


def config_from_args(args) -> PipelineConfig:
    """Build and validate a :class:`PipelineConfig`; raises ``ValueError``."""
    opt = lambda name, default=None: getattr(args, name, default)  # noqa: E731
    return PipelineConfig(
        mask_path=opt("mask"),
        image_path=opt("image"),
        scale=opt("scale", 1.0),
        spec=_spec(args),
        max_theta_deg=args.max_theta_deg,
        smoothing_window_px=args.smoothing_px,
        assumed_tree_height_m=args.tree_height_m,
        mm_per_px=args.mm_per_px,
        out_json=opt("out_json"),
        overlay=opt("overlay"),
        graph_dump=opt("graph_dump"),
        skeleton_pgm=opt("skeleton_pgm"),
        skip_prune=args.skip_prune,
        stress_check=opt("stress_check", False),
        lever_m=opt("lever_m", mechanics.DEFAULT_LEVER_M),
        mor_mpa=opt("mor_mpa", mechanics.DEFAULT_MOR_MPA),
        safety_factor=opt("safety_factor", mechanics.DEFAULT_SAFETY_FACTOR),
        verbose_candidates=opt("verbose_candidates", False),
    )


def seed_base(explicit: int | None) -> int:
    if explicit is not None:
        return explicit
    env = os.environ.get(SEED_ENV)
    if env is None or env.strip() == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise ValueError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def cmd_run(args) -> int:
    config = config_from_args(args)
    run = run_pipeline(config)
    write_outputs(run, config)
    if not config.out_json:
        report = build_report(run, verbose=config.verbose_candidates,
                              timings=not args.no_timings)
        json.dump(report, sys.stdout, indent=2)
        sys.stdout.write("\n")
    log.info("status %s", run.result.status.value)
    return run.exit_code


def cmd_profile(args) -> int:
    rows = profile(config_from_args(args), args.scales)
    write_profile_csv(rows, args.out)
    for row in rows:
        print(f"scale {row.scale:g}: total {row.total:.3f} s")
    return 0


def cmd_oracle(args) -> int:
    from .oracle import generate_tree, write_tree

    if args.seeds < 1:
        raise ValueError("--seeds must be at least 1")
    base = seed_base(args.seed_base)
    out = Path(args.out)
    for i in range(args.seeds):
        tree = generate_tree(base + i, include_ideal=not args.no_ideal)
        write_tree(tree, out)
    print(f"wrote {args.seeds} trees to {out}")
    return 0


def cmd_evaluate(args) -> int:
    from .oracle import evaluate_dir

    cfg = config_from_args(args)
    ev = evaluate_dir(args.dir, cfg.spec, skip_prune=cfg.skip_prune,
                      max_theta_deg=cfg.max_theta_deg,
                      smoothing_window_px=cfg.smoothing_window_px)
    if ev.n_trees == 0:
        raise ValueError(f"no truth files in {args.dir}")
    ev.write_csv(args.out)
    print(f"success rate {ev.success_rate:.3f} over {ev.n_trees} trees "
          f"({ev.hits} hits, {ev.correct_rejections} correct rejections)")
    return 0


COMMANDS = {"run": cmd_run, "profile": cmd_profile, "oracle": cmd_oracle,
            "evaluate": cmd_evaluate}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except PipelineError as exc:
        print(f"pli: stage {exc.stage} failed: {exc.cause}", file=sys.stderr)
    except (ValueError, OSError) as exc:
        print(f"pli: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
