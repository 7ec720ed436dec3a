"""Command line entry point.

Exit codes: 0 success, 2 validation or configuration error, 3 numeric
failure, 4 I/O error.
"""

import argparse
import sys

import numpy as np

from . import report as rpt
from .attribution import DEFAULT_BACKGROUND_CAP, ShapleyExplainer
from .data import read_csv, write_csv
from .exceptions import CoalitionAttribError
from .forest import ForestConfig, RandomForest
from .game import load_game, shapley_by_permutations, shapley_by_subsets
from .linear import OLSRegression
from .simulation import EXPERIMENTS, generate

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _fmt(x):
    return f"{x:.6g}"


def cmd_game_solve(args, out):
    game = load_game(args.file)
    solver = shapley_by_permutations if args.method == "permutations" else shapley_by_subsets
    alloc = solver(game)
    width = max(len(p) for p in game.players)
    for player, value in zip(alloc.players, alloc.values):
        print(f"{player:<{width}}  {_fmt(value)}", file=out)
    total = float(np.sum(alloc.values))
    status = "ok" if alloc.is_efficient() else "FAILED"
    print(
        f"efficiency: sum {_fmt(total)} = v(all) {_fmt(alloc.grand_worth)} "
        f"- v(empty) {_fmt(alloc.empty_worth)} [{status}]",
        file=out,
    )
    return EXIT_OK if alloc.is_efficient() else EXIT_NUMERIC


def cmd_experiment_run(args, out):
    config = rpt.RunConfig.for_seed(
        args.name, seed=args.seed, n=args.n, noise_sd=args.noise_sd, n_trees=args.trees,
        mode=args.mode, n_permutations=args.permutations,
        background_cap=args.background_cap,
        output=rpt.OutputConfig(args.format, args.out),
    )
    if args.dump_csv:
        write_csv(generate(config.experiment), args.dump_csv)
    report = rpt.run_experiment(config)
    if args.out:
        rpt.emit_report(report, args.format, args.out)
    elif args.format_given:
        out.write(rpt.emit_report(report, args.format))
    else:
        out.write(rpt.text_table(report))
    return EXIT_OK


def cmd_explain(args, out):
    data = read_csv(args.data, args.target)
    if args.model == "ols":
        model = OLSRegression().fit(data.X, data.y)
    else:
        model = RandomForest.from_config(ForestConfig(n_trees=args.trees, seed=args.seed))
        model.fit(data.X, data.y)
    explainer = ShapleyExplainer(model, mode=args.mode, n_permutations=args.permutations,
                                 background_cap=args.background_cap, random_state=args.seed)
    result = explainer.fit(data.X).explain(data.X)
    result = type(result)(result.base_value, result.attributions, data.feature_names,
                          result.standard_errors)
    if args.out:
        text = rpt.attribution_csv(result) if args.format == "csv" else rpt.attribution_json(result)
        with open(args.out, "w") as fh:
            fh.write(text)
    print(f"base value: {_fmt(result.base_value)}", file=out)
    print("Mean Absolute SHAP Values:", file=out)
    for name, value in zip(result.feature_names, result.mean_abs()):
        print(f"{name}: {_fmt(value)}", file=out)
    return EXIT_OK


class _FormatAction(argparse.Action):
    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, values)
        namespace.format_given = True


def build_parser():
    parser = argparse.ArgumentParser(
        prog="coalition-attrib",
        description="Shapley values for cooperative games and regression models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    game = sub.add_parser("game", help="cooperative games")
    game_sub = game.add_subparsers(dest="game_command", required=True)
    solve = game_sub.add_parser("solve", help="Shapley values of a game file")
    solve.add_argument("file")
    solve.add_argument("--method", choices=["subsets", "permutations"], default="subsets")
    solve.set_defaults(func=cmd_game_solve)

    exp = sub.add_parser("experiment", help="simulation experiments")
    exp_sub = exp.add_subparsers(dest="experiment_command", required=True)
    run = exp_sub.add_parser("run", help="OLS coefficients vs forest mean |SHAP|")
    run.add_argument("--name", choices=EXPERIMENTS, required=True)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--n", type=int, default=1000)
    run.add_argument("--noise-sd", type=float, default=0.1)
    run.add_argument("--trees", type=int, default=100)
    run.add_argument("--mode", choices=rpt.MODES, default="exact")
    run.add_argument("--permutations", type=int, default=1000)
    run.add_argument("--background-cap", type=int, default=DEFAULT_BACKGROUND_CAP)
    run.add_argument("--out")
    run.add_argument("--format", choices=rpt.FORMATS, default="json", action=_FormatAction)
    run.add_argument("--dump-csv", metavar="PATH")
    run.set_defaults(func=cmd_experiment_run, format_given=False)

    exp_ = sub.add_parser("explain", help="attribute a model fitted to a CSV dataset")
    exp_.add_argument("--data", required=True)
    exp_.add_argument("--target", required=True)
    exp_.add_argument("--model", choices=["ols", "forest"], required=True)
    exp_.add_argument("--mode", choices=rpt.MODES, default="exact")
    exp_.add_argument("--permutations", type=int, default=1000)
    exp_.add_argument("--background-cap", type=int, default=DEFAULT_BACKGROUND_CAP)
    exp_.add_argument("--trees", type=int, default=100)
    exp_.add_argument("--seed", type=int, default=0)
    exp_.add_argument("--out")
    exp_.add_argument("--format", choices=["json", "csv"], default="json")
    exp_.set_defaults(func=cmd_explain)
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except CoalitionAttribError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
