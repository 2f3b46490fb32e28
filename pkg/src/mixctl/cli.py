"""``mixctl`` command line: simulate, fit, classify, evaluate, sweep."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io
from ._validation import FitError, ParameterError, check_posteriors
from .control import optimal_rule
from .evaluation import evaluate
from .mixture import EmConfig, fit_em, sample
from .rules import RuleSpec, apply_lambda, map_rule, thresholded_rule
from .sim import ScenarioConfig, build_model, expand_grid, run_grid

log = logging.getLogger("mixctl")

SEED_ENV = "MIXCTL_SEED"

RESULT_COLUMNS = [
    "family", "D", "sigma2_or_dof", "mode", "alpha", "interest", "rule", "replicate",
    "mfdr", "mnpr", "mfnr", "n_classified", "lambda_hat", "tau_threshold",
]


class CliError(Exception):
    pass


def _seed(args) -> int:
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CliError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return args.seed


def _int_list(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_pair(text: str) -> tuple:
    parts = text.split(",")
    try:
        if len(parts) != 2:
            raise ValueError
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'D,sigma2' or 'D,dof', got {text!r}") from None


def cmd_simulate(args) -> None:
    if (args.model is None) == (args.preset is None):
        raise CliError("give exactly one of a model file or --preset")
    if args.model is not None:
        model = io.read_model_json(args.model)
    else:
        D, param = args.preset
        if args.family == "gaussian":
            cfg = ScenarioConfig(family="gaussian", D=D, sigma2=param)
        else:
            cfg = ScenarioConfig(family="student", D=D, dof=param)
        model = build_model(cfg)
    counts = args.n_per_class
    if len(counts) == 1:
        counts = counts * model.n_components
    data = sample(model, counts, seed=_seed(args))
    io.write_sample_csv(args.out, data)
    if args.model_out:
        io.write_model_json(args.model_out, model)


def cmd_fit(args) -> None:
    points, _ = io.read_sample_csv(args.sample)
    cfg = EmConfig(max_iterations=args.max_iter, loglik_tolerance=args.tol,
                   n_restarts=args.restarts, covariance_floor=args.covariance_floor)
    n, d = points.shape
    if n < args.classes * (d + 1):
        raise CliError(f"{n} points are too few for {args.classes} classes in {d} dimensions "
                       f"(need {args.classes * (d + 1)})")
    res = fit_em(points, args.classes, cfg, seed=_seed(args))
    log.info("EM log-likelihood %.6f after %d iterations", res.log_likelihood, res.n_iter)
    io.write_model_json(args.out, res.model)


def _load_posteriors(args) -> np.ndarray:
    if args.posteriors is not None:
        if args.model or args.sample:
            raise CliError("give either a posterior file or --model with --sample, not both")
        return check_posteriors(io.read_posteriors_csv(args.posteriors))
    if not (args.model and args.sample):
        raise CliError("give a posterior file, or both --model and --sample")
    model = io.read_model_json(args.model)
    points, _ = io.read_sample_csv(args.sample)
    return model.posterior(points)


def cmd_classify(args) -> None:
    T = _load_posteriors(args)
    spec = RuleSpec(args.risk, args.alpha, args.interest)
    interest = spec.resolve(T.shape[1])
    estimate = None
    if args.rule == "map":
        labels = map_rule(T, interest)
    elif args.rule == "threshold":
        labels = thresholded_rule(T, spec)
    elif args.lambda_ is not None:
        labels = apply_lambda(T, spec, args.lambda_)
    else:
        if T.shape[0] == 0:
            raise CliError("cannot estimate lambda from an empty posterior file")
        labels, estimate = optimal_rule(T, spec)
    io.write_predictions_csv(args.out, labels)
    if args.estimate_out:
        if estimate is None:
            raise CliError("--estimate-out needs --rule optimal without --lambda")
        io.write_json(args.estimate_out, estimate.to_dict())


def cmd_evaluate(args) -> None:
    pred = io.read_label_column(args.predictions)
    truth = io.read_label_column(args.labels)
    interest = args.interest
    if interest is None:
        n_classes = args.classes or int(max(truth.max(initial=0), pred.max(initial=0)))
        interest = list(range(1, n_classes + 1))
    report = evaluate(pred, truth, interest)
    io.write_json(args.out, report.to_dict())


def cmd_sweep(args) -> None:
    with open(args.grid) as fh:
        try:
            grid = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CliError(f"{args.grid}: not valid JSON ({exc})") from None
    configs = expand_grid(grid)
    result = run_grid(configs, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_records_csv(out / "results.csv", result.records(), RESULT_COLUMNS)
    io.write_records_csv(out / "aggregate.csv", result.aggregate_records())
    failed = sum(c.n_failed for c in result.cells)
    if failed:
        log.warning("%d replicate(s) failed and were excluded", failed)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixctl",
        description="Error-rate controlled classification for mixture models.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a labeled sample from a mixture")
    p.add_argument("model", nargs="?", help="model JSON file")
    p.add_argument("--preset", type=_float_pair, metavar="D,PARAM",
                   help="three-class benchmark model; PARAM is sigma2 or dof")
    p.add_argument("--family", choices=["gaussian", "student"], default="gaussian")
    p.add_argument("--n-per-class", type=_int_list, default=[200],
                   help="one count for every class, or one per class")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.add_argument("--model-out", help="also write the generating model as JSON")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a Gaussian mixture by EM")
    p.add_argument("sample")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--covariance-floor", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("classify", help="apply the MAP, thresholded or optimal rule")
    p.add_argument("posteriors", nargs="?", help="CSV with columns tau_1..tau_P")
    p.add_argument("--model")
    p.add_argument("--sample")
    p.add_argument("--risk", choices=["mfdr", "mnpr"], default="mfdr")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--interest", type=_int_list, default=None)
    p.add_argument("--rule", choices=["map", "threshold", "optimal"], default="optimal")
    p.add_argument("--lambda", dest="lambda_", type=float, default=None,
                   help="apply a previously estimated cut-off instead of estimating one")
    p.add_argument("--out", default="-")
    p.add_argument("--estimate-out", help="write the lambda estimate as JSON")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", help="realized error rates against true labels")
    p.add_argument("predictions")
    p.add_argument("labels", help="CSV with a 'label' column")
    p.add_argument("--interest", type=_int_list, default=None)
    p.add_argument("--classes", type=int, default=None)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="run a replicated simulation grid")
    p.add_argument("grid", help="grid description JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="mixctl: %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except (CliError, ValueError, ParameterError, FitError, OSError) as exc:
        print(f"mixctl: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
