"""Command-line front end: generate, train, evaluate, optimize, sweep, compare.

Every run appends one JSON line to ``<out-dir>/manifest.jsonl``.  Exit codes:
0 success, 2 configuration error, 3 data error, 4 range error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time

from . import config as cfgmod
from . import oracle, pipeline, plotting, search
from .datasets import read_csv, write_csv
from .errors import ConfigError, D2eaError, DataError
from .gbrt import STAGE_ONE, STAGE_TWO, GbrtParams, gbrt_fit
from .pso import PsoConfig
from .residual_stack import D2eaModel, d2ea_fit, data_size_sweep, evaluate


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_table(path, rows, columns):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])


def _file_digest(path):
    try:
        with open(path, "rb") as fh:
            return hashlib.sha256(fh.read()).hexdigest()[:16]
    except OSError:
        return None


class Run:
    """Collects inputs/outputs of one command and writes its manifest line."""

    def __init__(self, args, cfg):
        self.args = args
        self.cfg = cfg
        self.inputs = []
        self.outputs = []
        self.t0 = time.perf_counter()
        os.makedirs(args.out_dir, exist_ok=True)

    def out(self, name):
        path = os.path.join(self.args.out_dir, name)
        self.outputs.append(path)
        return path

    def finish(self, status):
        entry = {
            "command": self.args.command,
            "status": status,
            "seed": self.args.seed,
            "config": self.args.config,
            "config_digest": cfgmod.digest(self.cfg) if self.cfg else None,
            "inputs": {p: _file_digest(p) for p in self.inputs},
            "outputs": {p: _file_digest(p) for p in self.outputs},
            "duration_s": round(time.perf_counter() - self.t0, 3),
        }
        with open(os.path.join(self.args.out_dir, "manifest.jsonl"), "a") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


def _oracle_params(cfg):
    return oracle.OracleParams.from_mapping(cfg.get("oracle", {}))


def _pso_config(cfg, seed):
    values = cfgmod.section(cfg, "pso", fallback_root=True)
    values.setdefault("seed", str(seed))
    return PsoConfig.from_mapping(values)


def _hyperparams(cfg):
    hp1 = GbrtParams.from_mapping(cfg.get("stage1", {}), base=STAGE_ONE)
    hp2 = GbrtParams.from_mapping(cfg.get("stage2", {}), base=STAGE_TWO)
    return hp1, hp2


def _grid_counts(text):
    try:
        counts = tuple(int(x) for x in text.lower().split("x"))
    except ValueError:
        raise ConfigError(f"--sim-grid must look like 25x25x20, got {text!r}") from None
    if len(counts) != 3:
        raise ConfigError(f"--sim-grid needs three counts, got {text!r}")
    return counts


def _load_pools(run, args):
    run.inputs += [args.sim, args.exp]
    sim = read_csv(args.sim, fidelity="sim")
    exp = read_csv(args.exp, fidelity="exp")
    return pipeline.split_pools(sim, exp, args.seed)


def _load_model(run, path):
    run.inputs.append(path)
    try:
        return D2eaModel.load(path)
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc.strerror}") from None


REPORT_COLUMNS = ["approach", "dataset", "mean_abs_error_pp", "accuracy_percent", "worst_abs_error_pp", "n"]


def cmd_generate(run, args):
    params = _oracle_params(run.cfg)
    data_cfg = run.cfg.get("data", {})
    grid = _grid_counts(args.sim_grid or data_cfg.get("sim_grid", "25x25x20"))
    try:
        count = int(args.exp_count if args.exp_count is not None else data_cfg.get("exp_count", 1000))
    except ValueError:
        raise ConfigError("exp_count must be an integer") from None
    sim, exp = pipeline.generate(args.seed, params, grid, count)
    write_csv(sim, run.out("sim.csv"))
    write_csv(exp, run.out("exp.csv"))
    print(f"wrote {len(sim)} simulation and {len(exp)} experimental samples to {args.out_dir}")


def cmd_train(run, args):
    hp1, hp2 = _hyperparams(run.cfg)
    pools = _load_pools(run, args)
    model_path = args.model or run.out("model.json")
    if args.model:
        run.outputs.append(model_path)
    if args.baselines == "on":
        comp = pipeline.train(pools, hp1, hp2)
        model = comp.models["d2ea"]
    else:
        comp = None
        model = d2ea_fit(pools.sim_train, pools.exp_train, hp1, hp2)
    model.metadata["seed"] = args.seed
    model.save(model_path)

    rows = [
        {"approach": "stage1", "dataset": "sim_test", **evaluate(model.stage_one, pools.sim_test).as_row()},
        {"approach": "d2ea", "dataset": "exp_test", **evaluate(model.predict_many, pools.exp_test).as_row()},
    ]
    if comp is not None:
        for name, rep in comp.reports.items():
            rows.append({"approach": name, "dataset": "exp_validation", **rep.as_row()})
        plotting.accuracy_bars(comp.reports, run.out("accuracy.svg"))
    write_table(run.out("report.csv"), rows, REPORT_COLUMNS)
    for r in rows:
        print(f"{r['approach']:>9} {r['dataset']:>15}  error {r['mean_abs_error_pp']:.4f} pp  "
              f"accuracy {r['accuracy_percent']:.3f}%")


def cmd_evaluate(run, args):
    model = _load_model(run, args.model)
    run.inputs.append(args.data)
    data = read_csv(args.data)
    rep = evaluate(model.predict_many, data)
    write_table(run.out("evaluate.csv"), [{"approach": "d2ea", "dataset": args.data, **rep.as_row()}], REPORT_COLUMNS)
    print(f"n={rep.n} error {rep.mean_abs_error_pp:.4f} pp accuracy {rep.accuracy_percent:.3f}% "
          f"worst {rep.worst_abs_error_pp:.4f} pp")


def cmd_optimize(run, args):
    model = _load_model(run, args.model)
    cfg = _pso_config(run.cfg, args.seed)
    opt = search.optimize_at_power(model, args.power, cfg)
    result = {
        "p": opt.p,
        "d1": opt.d1,
        "d2": opt.d2,
        "eta": opt.eta,
        "grid": {"d1": opt.grid_d1, "d2": opt.grid_d2, "eta": opt.grid_eta},
        "grid_discrepancy": opt.grid_discrepancy,
    }
    with open(run.out("optimum.json"), "w") as fh:
        json.dump(result, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_table(run.out("trace.csv"), [{"iteration": i, "incumbent": v} for i, v in enumerate(opt.trace)],
                ["iteration", "incumbent"])
    plotting.incumbent_trace(opt.trace, run.out("trace.svg"))
    print(f"P={opt.p:g} W: d1={opt.d1:.4f} d2={opt.d2:.4f} eta={opt.eta:.4f}% "
          f"(grid {opt.grid_d1:.3f}, {opt.grid_d2:.3f}; discrepancy {opt.grid_discrepancy:.4f})")


SWEEP_COLUMNS = ["p", "d1_opt", "d2_opt", "eta_pred", "eta_hw_check"]


def cmd_sweep(run, args):
    model = _load_model(run, args.model)
    try:
        powers = search.parse_powers(args.powers)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cfg = _pso_config(run.cfg, args.seed)
    params = _oracle_params(run.cfg) if (args.oracle or "oracle" in run.cfg) else None
    points = search.sweep(model, powers, cfg, params)
    rows = [
        {"p": sp.optimum.p, "d1_opt": sp.optimum.d1, "d2_opt": sp.optimum.d2,
         "eta_pred": sp.optimum.eta, "eta_hw_check": sp.eta_hw_check}
        for sp in points
    ]
    write_table(run.out("sweep.csv"), rows, SWEEP_COLUMNS)
    plotting.optimum_sweep(rows, run.out("sweep.svg"))
    print(f"swept {len(rows)} loads -> {os.path.join(args.out_dir, 'sweep.csv')}")


def cmd_compare(run, args):
    hp1, hp2 = _hyperparams(run.cfg)
    pools = _load_pools(run, args)
    comp = pipeline.train(pools, hp1, hp2)
    try:
        powers = search.parse_powers(args.powers)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rows = pipeline.optimality_rows(comp.models, powers, _pso_config(run.cfg, args.seed), _oracle_params(run.cfg))
    cols = ["p", "d1_best", "d2_best", "eta_hw_best"]
    for name in comp.models:
        cols += [f"d1_{name}", f"d2_{name}", f"eta_pred_{name}", f"eta_hw_{name}"]
    write_table(run.out("compare.csv"), rows, cols)
    plotting.optimality(rows, run.out("compare.svg"))
    for r in rows:
        print(f"P={r['p']:g} W: oracle {r['eta_hw_best']:.3f}  "
              + "  ".join(f"{n} {r['eta_hw_' + n]:.3f}" for n in comp.models))


def cmd_data_size_sweep(run, args):
    hp1, hp2 = _hyperparams(run.cfg)
    pools = _load_pools(run, args)
    try:
        fractions = [float(x) for x in args.fractions.split(",")]
    except ValueError:
        raise ConfigError(f"bad --fractions {args.fractions!r}") from None
    sim_model = gbrt_fit(pools.sim_train.X, pools.sim_train.eta, hp1)
    try:
        rows = data_size_sweep(sim_model, pools.exp_train, pools.exp_val, fractions, args.repeats, args.seed, hp2)
    except ValueError as exc:
        if isinstance(exc, D2eaError):
            raise
        raise ConfigError(str(exc)) from None
    cols = ["fraction", "n_train", "mean_accuracy", "min_accuracy", "max_accuracy", "mean_error_pp"]
    write_table(run.out("data_size.csv"), [r.__dict__ for r in rows], cols)
    plotting.data_size(rows, run.out("data_size.svg"))
    for r in rows:
        print(f"fraction {r.fraction:.2f} (n={r.n_train}): accuracy {r.mean_accuracy:.3f}% "
              f"[{r.min_accuracy:.3f}, {r.max_accuracy:.3f}]")


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "data-size-sweep": cmd_data_size_sweep,
}


def build_parser():
    # SUPPRESS lets the global flags appear before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--config", default=argparse.SUPPRESS, help="key = value config file")
    common.add_argument("--out-dir", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="d2ea", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="simulation grid and experimental pool")
    p.add_argument("--sim-grid", help="grid counts, e.g. 25x25x20")
    p.add_argument("--exp-count", type=int)

    def pools(p):
        p.add_argument("--sim", required=True, help="simulation CSV")
        p.add_argument("--exp", required=True, help="experimental CSV")

    p = sub.add_parser("train", parents=[common], help="fit the two-stage model")
    pools(p)
    p.add_argument("--model", help="output model path (default <out-dir>/model.json)")
    p.add_argument("--baselines", choices=("on", "off"), default="on")

    p = sub.add_parser("evaluate", parents=[common], help="score a model on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)

    p = sub.add_parser("optimize", parents=[common], help="best modulation at one load")
    p.add_argument("--model", required=True)
    p.add_argument("--power", type=float, required=True)

    p = sub.add_parser("sweep", parents=[common], help="best modulation across loads")
    p.add_argument("--model", required=True)
    p.add_argument("--powers", default="200:2000:200", help="start:stop:step or comma list")
    p.add_argument("--oracle", action="store_true", help="check optima against the synthetic oracle")

    p = sub.add_parser("compare", parents=[common], help="true efficiency at each approach's optimum")
    pools(p)
    p.add_argument("--powers", default="600")

    p = sub.add_parser("data-size-sweep", parents=[common], help="accuracy vs experimental data size")
    pools(p)
    p.add_argument("--fractions", default="0.1,0.25,0.5,1.0")
    p.add_argument("--repeats", type=int, default=10)
    return parser


GLOBAL_DEFAULTS = {"seed": pipeline.DEFAULT_SEED, "config": None, "out_dir": "."}


def main(argv=None):
    args = build_parser().parse_args(argv)
    # not set_defaults: the shared parent actions would take the default too
    for key, value in GLOBAL_DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, value)
    run = None
    try:
        cfg = cfgmod.load_config(args.config) if args.config else {}
        run = Run(args, cfg)
        if args.config:
            run.inputs.append(args.config)
        try:
            COMMANDS[args.command](run, args)
        except OSError as exc:
            raise DataError(f"{exc.filename}: {exc.strerror}") from None
    except D2eaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if run is not None:
            run.finish(f"error:{exc.exit_code}")
        else:
            Run(args, {}).finish(f"error:{exc.exit_code}")
        return exc.exit_code
    run.finish("ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
