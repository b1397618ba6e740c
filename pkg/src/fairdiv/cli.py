"""Command-line entry point: ``fairdiv <command> [flags]``.

Exit codes: 0 success, 2 usage or input error, 3 infeasible budget,
4 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from .bounds import (
    LossMatrix,
    constant_sweep,
    empirical_rademacher,
    generalization_bound,
    phi_shape_table,
    random_scorers,
    table_to_csv,
)
from .dependency import estimate_dependency
from .divergence import PHI_NAMES, RatioBounds, get_phi
from .exceptions import ConvergenceError, FairDivError, InfeasibleBudget
from .learner import SOLVERS, LinearScorer, TrainConfig, train_dataset
from .plotting import SvgChart
from .ratio import KernelSpec
from .synthetic import (
    DiscreteScenario,
    dataset_from_csv,
    dataset_to_csv,
    generate,
    oracle_dependency,
    scenario_from_json,
    scenario_to_json,
)

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_NONCONVERGED = 0, 2, 3, 4


class UsageError(Exception):
    pass


# -- argument types ---------------------------------------------------------------

def _eta(text):
    value = float(text)
    if math.isnan(value) or value < 0:
        raise argparse.ArgumentTypeError(f"eta must be >= 0 (or inf), got {text!r}")
    return value


def _float_list(text):
    text = str(text).strip()
    if not text:
        return []
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _phi(text):
    try:
        return get_phi(text).kind
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--phi", type=_phi, default="hellinger", help=f"one of {PHI_NAMES}")
    common.add_argument("--eta", type=_eta, default=math.inf, help="dependency budget")
    common.add_argument("--t", type=float, default=2.3, help="confidence parameter")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--config", help="flat 'key = value' file; flags override it")
    common.add_argument("--out", help="primary output path")
    common.add_argument("--c-lo", type=float, default=0.1, help="lower ratio bound")
    common.add_argument("--c-hi", type=float, default=10.0, help="upper ratio bound")

    parser = argparse.ArgumentParser(prog="fairdiv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        subs[name] = sp
        return sp

    sp = add("gen", "generate a synthetic dataset CSV")
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--scenario", choices=("binary", "random"), default="binary")
    sp.add_argument("--knob", type=float, default=0.8, help="dependency knob in [0, 1]")
    sp.add_argument("--n-v", type=int, default=2)
    sp.add_argument("--n-y", type=int, default=2)
    sp.add_argument("--grid-size", type=int, default=6)
    sp.add_argument("--dim-w", type=int, default=2)
    sp.add_argument("--scenario-seed", type=int, default=0)
    sp.add_argument("--scenario-out", help="also write the scenario as JSON")

    sp = add("train", "train a scorer under the dependency budget")
    sp.add_argument("--data")
    sp.add_argument("--coupling-rho", type=float, default=10.0)
    sp.add_argument("--max-iter", type=int, default=3000)
    sp.add_argument("--tol", type=float, default=1e-3)
    sp.add_argument("--solver", choices=SOLVERS, default="auto")

    sp = add("predict", "write hard predictions of a model")
    sp.add_argument("--model")
    sp.add_argument("--data")

    sp = add("audit", "estimate the dependency of predictions on the viewpoint")
    sp.add_argument("--data")
    sp.add_argument("--pred")

    sp = add("sweep", "train over a list of budgets")
    sp.add_argument("--data")
    sp.add_argument("--etas", type=_float_list, default=[math.inf, 0.5, 0.1, 0.05, 0.01])
    sp.add_argument("--scenario", help="scenario JSON; adds the exact oracle dependency")
    sp.add_argument("--svg", help="trade-off chart path")
    sp.add_argument("--coupling-rho", type=float, default=10.0)
    sp.add_argument("--max-iter", type=int, default=3000)
    sp.add_argument("--tol", type=float, default=1e-3)
    sp.add_argument("--solver", choices=SOLVERS, default="auto")

    sp = add("constants", "tabulate the bound constant and the generator shapes")
    sp.add_argument("--t-grid", type=_float_list, default=[0.1, 0.5, 1.0, 2.0])
    sp.add_argument("--u-grid", type=_float_list, default=None)

    sp = add("rademacher", "Monte-Carlo Rademacher complexity of a finite scorer set")
    sp.add_argument("--data")
    sp.add_argument("--model", action="append", default=[], help="repeatable")
    sp.add_argument("--reference", help="model whose losses are subtracted")
    sp.add_argument("--random-scorers", type=int, default=0)
    sp.add_argument("--scale", type=float, default=1.0)
    sp.add_argument("--draws", type=int, default=100_000)
    sp.add_argument("--risk-gap", type=float, default=0.0)
    return parser, subs


def read_config(path):
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise UsageError(f"{path}:{lineno}: empty key")
            values[key] = value
    return values


def parse_args(argv):
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if not args.config:
        return args
    sp = subs[args.command]
    actions = {a.dest: a for a in sp._actions if a.dest not in ("help", "config")}
    try:
        values = read_config(args.config)
    except OSError as exc:
        sp.error(f"cannot read config: {exc}")
    except UsageError as exc:
        sp.error(str(exc))
    defaults = {}
    for key, raw in values.items():
        dest = key.removeprefix("bounds.").replace("-", "_").replace(".", "_")
        action = actions.get(dest)
        if action is None:
            sp.error(f"unknown config key {key!r}")
        try:
            if isinstance(action, argparse._AppendAction):
                value = [x.strip() for x in raw.split(",") if x.strip()]
            else:
                value = action.type(raw) if action.type else raw
        except (ValueError, TypeError, argparse.ArgumentTypeError) as exc:
            sp.error(f"config key {key!r}: {exc}")
        if action.choices is not None and value not in action.choices:
            sp.error(f"config key {key!r}: {value!r} not in {sorted(action.choices)}")
        defaults[dest] = value
    sp.set_defaults(**defaults)
    return parser.parse_args(argv)


# -- output helpers -----------------------------------------------------------------

def write_atomic(path, text):
    """Write via a temporary file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, list):
        return [_jsonable(v) for v in x]
    return x


def write_manifest(path, args):
    manifest = {k: _jsonable(v) for k, v in sorted(vars(args).items())}
    write_atomic(path, json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def _need(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if not getattr(args, n)]
    if missing:
        raise UsageError(f"{args.command}: missing {', '.join(missing)}")


def _read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _bounds(args):
    return RatioBounds(args.c_lo, args.c_hi)


def _config(args, eta):
    return TrainConfig(
        eta=eta, phi=args.phi, bounds=_bounds(args), coupling_rho=args.coupling_rho,
        max_outer_iters=args.max_iter, tol=args.tol, solver=args.solver,
    )


def _shape(data):
    return int(data.y.max()) + 1, int(data.v.max()) + 1


def _fit(data, config):
    n_classes, n_v = _shape(data)
    return train_dataset(data, config, n_classes=max(n_classes, 2), n_v=n_v)


# -- commands -----------------------------------------------------------------------

def cmd_gen(args):
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    if args.scenario == "binary":
        scenario = DiscreteScenario.binary(args.knob)
    else:
        scenario = DiscreteScenario.random(
            args.n_v, args.n_y, args.grid_size, args.dim_w, args.knob, seed=args.scenario_seed
        )
    data = generate(scenario, args.n, args.seed)
    out = args.out or "data.csv"
    write_atomic(out, dataset_to_csv(data))
    if args.scenario_out:
        write_atomic(args.scenario_out, scenario_to_json(scenario))
    write_manifest(out + ".manifest.json", args)
    print(f"wrote {data.n} rows to {out} (seed {args.seed})")
    return EXIT_OK


def _print_model(model):
    print(f"achieved_fairness = {model.achieved_fairness!r}")
    print(f"empirical_risk = {model.empirical_risk!r}")


def cmd_train(args):
    _need(args, "data")
    data = dataset_from_csv(_read(args.data))
    out = args.out or "model.txt"
    try:
        model = _fit(data, _config(args, args.eta))
    except InfeasibleBudget as exc:
        print(f"infeasible budget: {exc}", file=sys.stderr)
        write_atomic(out, exc.model.scorer.dumps())
        _print_model(exc.model)
        return EXIT_INFEASIBLE
    write_atomic(out, model.scorer.dumps())
    write_manifest(out + ".manifest.json", args)
    _print_model(model)
    return EXIT_OK


def cmd_predict(args):
    _need(args, "model", "data")
    scorer = LinearScorer.loads(_read(args.model))
    data = dataset_from_csv(_read(args.data))
    yhat = scorer.predict(data.X)
    text = "yhat\n" + "".join(f"{int(k)}\n" for k in yhat)
    if args.out:
        write_atomic(args.out, text)
        write_manifest(args.out + ".manifest.json", args)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def read_predictions(text):
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if lines and lines[0] == "yhat":
        lines = lines[1:]
    try:
        yhat = np.array([int(ln.split(",")[0]) for ln in lines], dtype=int)
    except ValueError as exc:
        raise UsageError(f"bad predictions file: {exc}") from None
    if yhat.size and yhat.min() < 0:
        raise UsageError("predictions must be non-negative labels")
    return yhat


def cmd_audit(args):
    _need(args, "data", "pred")
    data = dataset_from_csv(_read(args.data))
    yhat = read_predictions(_read(args.pred))
    if yhat.size != data.n:
        raise UsageError(f"{yhat.size} predictions for {data.n} rows")
    kernel = KernelSpec(int(data.v.max()) + 1, max(int(yhat.max()) + 1, 2))
    report = estimate_dependency(args.phi, (data.v, yhat), kernel, _bounds(args), t=args.t)
    print(f"note: upper_bound holds only if the true ratio lies in [{args.c_lo}, {args.c_hi}]",
          file=sys.stderr)
    sys.stdout.write(report.to_text())
    if args.out:
        write_atomic(args.out, report.to_csv())
        write_manifest(args.out + ".manifest.json", args)
    return EXIT_OK


def cmd_sweep(args):
    _need(args, "data")
    if not args.etas:
        raise UsageError("--etas must list at least one budget")
    if any(math.isnan(e) or e < 0 for e in args.etas):
        raise UsageError("every eta must be >= 0")
    data = dataset_from_csv(_read(args.data))
    scenario = scenario_from_json(_read(args.scenario)) if args.scenario else None
    header = ["eta", "risk", "achieved_fairness", "status"]
    if scenario is not None:
        header.append("oracle_dependency")
    rows, code = [], EXIT_OK
    for eta in args.etas:
        status = "ok"
        try:
            model = _fit(data, _config(args, eta))
        except InfeasibleBudget as exc:
            model, status, code = exc.model, "infeasible", max(code, EXIT_INFEASIBLE)
        except ConvergenceError:
            rows.append([eta, math.nan, math.nan, "nonconverged"] + ([math.nan] if scenario else []))
            code = max(code, EXIT_NONCONVERGED)
            continue
        row = [eta, model.empirical_risk, model.achieved_fairness, status]
        if scenario is not None:
            row.append(oracle_dependency(scenario, model.scorer, args.phi))
        rows.append(row)
    text = table_to_csv(rows, header)
    out = args.out or "sweep.csv"
    write_atomic(out, text)
    write_manifest(out + ".manifest.json", args)
    sys.stdout.write(text)
    if args.svg:
        ok = [r for r in rows if r[3] == "ok"]
        if ok:
            chart = SvgChart(xlabel="achieved fairness", ylabel="empirical risk",
                             title=f"risk vs dependency ({args.phi})")
            ok.sort(key=lambda r: r[2])
            chart.add(args.phi, [r[2] for r in ok], [r[1] for r in ok])
            write_atomic(args.svg, chart.render())
    return code


def cmd_constants(args):
    if not args.t_grid:
        raise UsageError("--t-grid must list at least one value")
    if any(not t > 0 for t in args.t_grid):
        raise UsageError("--t-grid values must be positive")
    out = args.out or "constants_out"
    os.makedirs(out, exist_ok=True)
    rows = constant_sweep(PHI_NAMES, args.t_grid)
    shape = phi_shape_table(PHI_NAMES, args.u_grid)
    write_atomic(os.path.join(out, "constants.csv"), table_to_csv(rows, ["phi", "t", "c"]))
    write_atomic(os.path.join(out, "phi_shape.csv"), table_to_csv(shape, ["phi", "u", "value"]))

    chart = SvgChart(xlabel="t", ylabel="c", title="bound constant with ratio bounds (e^-t, e^t)")
    for name in PHI_NAMES:
        pts = [(t, c) for p, t, c in rows if p == name]
        chart.add(name, *zip(*pts))
    write_atomic(os.path.join(out, "constants.svg"), chart.render())
    chart = SvgChart(xlabel="u", ylabel="phi(u)", title="generator shapes")
    for name in PHI_NAMES:
        pts = [(u, v) for p, u, v in shape if p == name and math.isfinite(v)]
        chart.add(name, *zip(*pts))
    write_atomic(os.path.join(out, "phi_shape.svg"), chart.render())
    write_manifest(os.path.join(out, "manifest.json"), args)
    sys.stdout.write(table_to_csv(rows, ["phi", "t", "c"]))
    return EXIT_OK


def cmd_rademacher(args):
    _need(args, "data")
    if args.draws < 1:
        raise UsageError("--draws must be at least 1")
    data = dataset_from_csv(_read(args.data))
    scorers = [LinearScorer.loads(_read(p)) for p in args.model]
    n_classes = max([s.n_classes for s in scorers] + [int(data.y.max()) + 1, 2])
    scorers += random_scorers(n_classes, data.X.shape[1], args.random_scorers, args.scale, args.seed)
    if not scorers:
        raise UsageError("give --model files and/or --random-scorers")
    ref = LinearScorer.loads(_read(args.reference)) if args.reference else None
    losses = LossMatrix.from_scorers(scorers, data.X, data.y, reference=ref)
    est = empirical_rademacher(losses, args.draws, args.seed)
    bound = generalization_bound(args.risk_gap, est, losses.range_bound, args.t, data.n)
    header = ["hypotheses", "rad", "rad_abs", "sup_variance", "draws", "std_error",
              "range_bound", "generalization_bound"]
    row = [len(scorers), est.rad, est.rad_abs, est.sup_variance, est.draws, est.std_error,
           losses.range_bound, bound]
    text = table_to_csv([row], header)
    if args.out:
        write_atomic(args.out, text)
        write_manifest(args.out + ".manifest.json", args)
    sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "predict": cmd_predict,
    "audit": cmd_audit,
    "sweep": cmd_sweep,
    "constants": cmd_constants,
    "rademacher": cmd_rademacher,
}


def main(argv=None):
    args = parse_args(argv)  # argparse exits with 2 on usage errors
    try:
        return COMMANDS[args.command](args)
    except InfeasibleBudget as exc:
        print(f"fairdiv: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ConvergenceError as exc:
        print(f"fairdiv: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (UsageError, FairDivError, ValueError, OSError) as exc:
        print(f"fairdiv {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
