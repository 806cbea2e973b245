"""``nesycl`` command line.

Exit status: 0 when every requested run completed and every check passed,
1 when a run or check failed, 2 on configuration / usage errors.
"""

from __future__ import annotations

import argparse
import sys
from typing import Any, Dict, List, Optional

from ..config import build_config
from ..exceptions import ConfigurationError, NesyclError, UnknownNameError
from ..logger_utils import get_resilient_logger
from .commands import cmd_analyze, cmd_eval, cmd_generate, cmd_sweep, cmd_train, load_sweep_plan
from .records import verify_run_dir

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def _log():
	return get_resilient_logger("nesycl.cli")


def _add_run_options(parser: argparse.ArgumentParser) -> None:
	parser.add_argument("--config", default=None, help="JSON config file (keys mirror RunConfig fields)")
	parser.add_argument("--benchmark", default=None, help="mnadd-seq | mnadd-shortcut | clevr-like")
	parser.add_argument("--seed", type=int, default=None)
	parser.add_argument("--sup-fraction", dest="sup_fraction", type=float, default=None)
	parser.add_argument("--out", default=None, help="Output directory")


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
	parser = argparse.ArgumentParser(prog="nesycl", description="Neuro-symbolic continual learning experiments")
	sub = parser.add_subparsers(dest="command", required=True)

	gen = sub.add_parser("generate", help="Write a benchmark dataset")
	_add_run_options(gen)
	gen.add_argument("--mnist-images", default=None, help="IDX image file replacing synthetic digits")
	gen.add_argument("--mnist-labels", default=None, help="IDX label file matching --mnist-images")

	train = sub.add_parser("train", help="Run one strategy through a task stream")
	_add_run_options(train)
	train.add_argument("--strategy", default=None)
	train.add_argument("--model", default=None, help="nesy | cbm")
	train.add_argument("--epochs", type=int, default=None)
	train.add_argument("--data", default=None, help="Dataset directory (default <data_dir>/<benchmark> when it holds a manifest)")
	train.add_argument("--force", action="store_true", help="Replace an existing run directory")

	sweep = sub.add_parser("sweep", help="Grid x seeds, aggregated mean and std")
	sweep.add_argument("--config", required=True, help="Sweep file with base, grid and seeds")
	sweep.add_argument("--out", default=None)
	sweep.add_argument("--parallel", type=int, default=1)
	sweep.add_argument("--data", default=None, help="Dataset directory shared by every run")
	sweep.add_argument("--force", action="store_true")

	for name, text in (("eval", "Re-evaluate the final checkpoint"), ("analyze", "Likelihood-maxima, bound and shortcut checks")):
		cmd = sub.add_parser(name, help=text)
		cmd.add_argument("run_dir")
	return parser.parse_args(argv)


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
	keys = ("benchmark", "strategy", "model", "seed", "epochs", "sup_fraction")
	return {k: getattr(args, k, None) for k in keys}


def _verified(run_dir: str) -> bool:
	problems = verify_run_dir(run_dir)
	for problem in problems:
		print(f"TAMPERED {problem}")
	return not problems


def _run(args: argparse.Namespace) -> int:
	if args.command == "generate":
		if bool(args.mnist_images) != bool(args.mnist_labels):
			raise ConfigurationError("--mnist-images and --mnist-labels go together")
		config = build_config(args.config, _overrides(args))
		mnist = (args.mnist_images, args.mnist_labels) if args.mnist_images else None
		manifest = cmd_generate(config, args.out, mnist)
		print(f"Saved dataset manifest to: {manifest}")
		return EXIT_OK

	if args.command == "train":
		config = build_config(args.config, _overrides(args))
		run_dir, record = cmd_train(config, args.data, args.out, args.force)
		for name, value in record.final_metrics.items():
			print(f"{name:>16}: {'-' if value is None else f'{value:.4f}'}")
		print(f"Saved run to: {run_dir}")
		return EXIT_OK

	if args.command == "sweep":
		plan = load_sweep_plan(args.config)
		out = args.out or build_config(overrides=plan.base).out_dir
		outcome = cmd_sweep(plan, out, max(1, args.parallel), args.data, args.force)
		failed = [run for run in outcome.runs if not run.ok]
		print(f"Saved sweep table to: {outcome.path} ({len(outcome.runs) - len(failed)}/{len(outcome.runs)} runs)")
		return EXIT_OK if outcome.ok else EXIT_FAILED

	if args.command == "eval":
		if not _verified(args.run_dir):
			return EXIT_FAILED
		outcome = cmd_eval(args.run_dir)
		for problem in outcome.mismatches:
			print(f"MISMATCH {problem}")
		return EXIT_OK if outcome.ok else EXIT_FAILED

	if args.command == "analyze":
		if not _verified(args.run_dir):
			return EXIT_FAILED
		outcome = cmd_analyze(args.run_dir)
		for failure in outcome.failures:
			print(f"FAIL {failure}")
		for note in outcome.notes:
			print(f"note {note}")
		return EXIT_OK if outcome.ok else EXIT_FAILED

	raise ConfigurationError(f"unknown command '{args.command}'")


def main(argv: Optional[List[str]] = None) -> int:
	args = parse_args(argv)
	try:
		return _run(args)
	except (ConfigurationError, UnknownNameError) as exc:
		_log().error(f"{args.command}: {exc}")
		print(f"error: {exc}", file=sys.stderr)
		return EXIT_USAGE
	except NesyclError as exc:
		_log().error(f"{args.command} failed: {exc}")
		print(f"failed: {exc}", file=sys.stderr)
		return EXIT_FAILED


if __name__ == "__main__":
	sys.exit(main())
