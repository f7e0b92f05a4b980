"""Command-line front end.

Every run writes a JSON manifest (command, resolved options, seed, library
versions and SHA-256 digests of the files written) next to its main output,
or to ``--manifest``. Failures print one JSON line ``{"error": ..., "message": ...}``
to stderr and exit with status 1 (status 2 for usage errors).

Settings are resolved in the order built-in defaults, then the YAML file
given by ``--config``, then command-line flags. The config file may hold the
sections ``parc`` (ParcConfig fields), ``data`` (``targets``, ``threshold``,
``overrides``, ``test_fraction``), ``optimize`` and ``benchmark``, plus a
top-level ``seed``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import sys
from dataclasses import fields

import numpy as np
import yaml

from . import __version__
from .core import ParcConfig, fit, select_k
from .data import CATEGORICAL, ColumnSpec, DataError, load_table, read_csv, split, write_csv
from .model import ParcModel
from .predictor import category_values, evaluate, predict

logger = logging.getLogger("parc")

#: Seed used when neither the config file nor ``--seed`` sets one.
DEFAULT_SEED = 0

_PARC_FLAGS = {
    "K": int, "alpha": float, "beta": float, "sigma": float, "separation": str,
    "epsilon": float, "max_iters": int, "c_min_fraction": float, "discard": str,
}
_PARC_HELP = {
    "K": "number of regions (default 5)",
    "alpha": "ridge/softmax penalty (default 0.1)",
    "beta": "penalty of the separation fit (default 1e-3)",
    "sigma": "weight of the separation term in assignment (default 1.0)",
    "separation": "softmax or voronoi (default softmax)",
    "epsilon": "stop when the objective stalls by less than this; 0 disables (default 1e-4)",
    "max_iters": "iteration cap (default 100)",
    "c_min_fraction": "clusters below this fraction of N are discarded (default 0.01)",
    "discard": "drop or reassign small clusters (default drop)",
}


class CliError(Exception):
    """Bad input detected by the CLI itself."""


# -- configuration -------------------------------------------------------

def load_config(path):
    if path is None:
        return {}
    if not os.path.exists(path):
        raise CliError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        cfg = yaml.safe_load(fh) or {}
    if not isinstance(cfg, dict):
        raise CliError("config file must hold a mapping")
    return cfg


def _pick(flag, section, key, default=None):
    if flag is not None:
        return flag
    return section.get(key, default)


def parc_config(args, cfg):
    section = dict(cfg.get("parc") or {})
    known = {f.name for f in fields(ParcConfig)}
    unknown = set(section) - known
    if unknown:
        raise CliError(f"unknown parc options in config: {sorted(unknown)}")
    for name in _PARC_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            section[name] = value
    section["seed"] = resolve_seed(args, cfg)
    for key in ("mu_c", "mu_d"):
        if section.get(key) is not None:
            section[key] = tuple(section[key])
    return ParcConfig(**section).validate()


def resolve_seed(args, cfg):
    return int(_pick(getattr(args, "seed", None), cfg, "seed", DEFAULT_SEED))


def _data_section(cfg):
    return cfg.get("data") or {}


def _overrides(cfg):
    out = {}
    for name, spec in (_data_section(cfg).get("overrides") or {}).items():
        if isinstance(spec, str):
            out[name] = spec
        else:
            out[name] = ColumnSpec(name, spec.get("kind", CATEGORICAL),
                                   [str(c) for c in spec.get("categories", [])])
    return out


def _targets(args, cfg):
    targets = args.target or _data_section(cfg).get("targets")
    if not targets:
        raise CliError("no target columns given (use --target or data.targets)")
    return list(targets)


def _require_file(path, what):
    if not os.path.exists(path):
        raise CliError(f"{what} not found: {path}")


# -- manifest ------------------------------------------------------------

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def versions():
    import scipy
    import sklearn

    return {"parc": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__,
            "scikit-learn": sklearn.__version__, "yaml": yaml.__version__}


def write_manifest(path, command, options, seed, outputs, config=None):
    manifest = {
        "command": command,
        "options": options,
        "seed": seed,
        "config": config,
        "rng": "numpy.random.default_rng (PCG64)",
        "versions": versions(),
        "outputs": {p: _sha256(p) for p in outputs if os.path.exists(p)},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def _manifest_path(args, main_output):
    if args.manifest:
        return args.manifest
    if main_output:
        return main_output + ".manifest.json"
    return "parc-run.manifest.json"


def _options(args):
    return {k: v for k, v in vars(args).items() if k != "func"}


def _print_json(obj):
    print(json.dumps(obj, sort_keys=True, default=_jsonable))


# -- commands ------------------------------------------------------------

def cmd_synth(args, cfg):
    from .synthetic import gen_nl_dataset, gen_pwa_dataset

    seed = resolve_seed(args, cfg)
    if args.experiment == "pwa":
        data = gen_pwa_dataset(args.n_samples, seed)
    else:
        data = gen_nl_dataset(args.n_samples, seed, args.low, args.high)
    rows = np.hstack([data.X, data.Yc])
    write_csv(args.out, ["x1", "x2", "y"], rows.tolist())
    print(f"wrote {data.n_samples} samples to {args.out}")
    write_manifest(_manifest_path(args, args.out), "synth", _options(args), seed, [args.out])


def _load_training(args, cfg):
    _require_file(args.data, "data file")
    section = _data_section(cfg)
    return load_table(args.data, _targets(args, cfg), _overrides(cfg),
                      int(section.get("threshold", 4)))


def cmd_fit(args, cfg):
    data = _load_training(args, cfg)
    config = parc_config(args, cfg)
    test_fraction = _pick(args.test_fraction, _data_section(cfg), "test_fraction")
    test = None
    if test_fraction:
        data, test = split(data, float(test_fraction), config.seed)
    model, report = fit(data, config)
    model.save(args.model)
    out = {"train": evaluate(model, data), "regions": model.n_regions,
           "iterations": report.iterations, "stop_reason": report.stop_reason}
    if test is not None:
        out["test"] = evaluate(model, test)
    _print_json(out)
    write_manifest(_manifest_path(args, args.model), "fit", _options(args), config.seed,
                   [args.model], config.to_dict())


def _load_for_model(model, path):
    """Encode ``path`` with the model's column specs; targets are optional."""
    _require_file(path, "data file")
    header, _ = read_csv(path)
    targets = [s.name for s in model.target_specs]
    present = [t for t in targets if t in header]
    if present and len(present) != len(targets):
        raise CliError(f"data holds only some target columns: {present}")
    features = [s.name for s in model.feature_specs]
    missing = [f for f in features if f not in header]
    if missing:
        raise CliError(f"feature columns not found: {missing}")
    extra = [h for h in header if h not in features and h not in targets]
    if extra:
        raise CliError(f"unexpected columns: {extra}")
    if present:
        return load_table(path, targets, feature_specs=model.feature_specs,
                          target_specs=model.target_specs), True
    return load_table(path, [], feature_specs=model.feature_specs, target_specs=[]), False


def cmd_predict(args, cfg):
    _require_file(args.model, "model file")
    model = ParcModel.load(args.model)
    data, has_targets = _load_for_model(model, args.data)
    yc, yd = predict(model, data.X)
    cats = category_values(model, yd)
    numeric = [s.name for s in model.target_specs if s.kind != CATEGORICAL]
    categorical = [s.name for s in model.target_specs if s.kind == CATEGORICAL]
    rows = [list(a) + list(b) for a, b in zip(yc.tolist(), cats)]
    write_csv(args.out, numeric + categorical, rows)
    if has_targets:
        _print_json(evaluate(model, data))
    else:
        print(f"wrote {len(rows)} predictions to {args.out}")
    write_manifest(_manifest_path(args, args.out), "predict", _options(args),
                   model.config.get("seed"), [args.out])


def cmd_evaluate(args, cfg):
    _require_file(args.model, "model file")
    model = ParcModel.load(args.model)
    data, has_targets = _load_for_model(model, args.data)
    if not has_targets:
        raise CliError("evaluation data has no target columns")
    metrics = evaluate(model, data)
    _print_json(metrics)
    if args.results:
        new = not os.path.exists(args.results)
        with open(args.results, "a", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            if new:
                w.writerow(["model", "data", "target", "metric", "value"])
            specs_c = [s for s in model.target_specs if s.kind != CATEGORICAL]
            specs_d = [s for s in model.target_specs if s.kind == CATEGORICAL]
            for s, v in zip(specs_c, metrics["r2"]):
                w.writerow([args.model, args.data, s.name, "r2", "" if v is None else repr(v)])
            for s, v in zip(specs_d, metrics["accuracy"]):
                w.writerow([args.model, args.data, s.name, "accuracy", repr(v)])
    write_manifest(_manifest_path(args, args.results), "evaluate", _options(args),
                   model.config.get("seed"), [args.results] if args.results else [])


def _parse_k_range(text):
    text = str(text)
    if ":" in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(k) for k in text.split(",") if k.strip()]


def cmd_select_k(args, cfg):
    data = _load_training(args, cfg)
    config = parc_config(args, cfg)
    best, scores = select_k(data, _parse_k_range(args.k_range), args.folds, config)
    _print_json({"best_K": best, "scores": {str(k): v for k, v in scores.items()}})
    outputs = []
    if args.out:
        write_csv(args.out, ["K", "cv_score"], [[k, float(v)] for k, v in scores.items()])
        outputs.append(args.out)
    write_manifest(_manifest_path(args, args.out), "select-k", _options(args), config.seed,
                   outputs, config.to_dict())


def _tracking_inputs(args, cfg, model):
    from .mip import default_box

    section = cfg.get("optimize") or {}
    y_ref = _pick(args.y_ref, section, "y_ref")
    if y_ref is None:
        raise CliError("no reference given (use --y-ref)")
    y_ref = np.atleast_1d(np.asarray(y_ref, dtype=float))
    if y_ref.size != model.n_numeric:
        raise CliError(f"--y-ref needs {model.n_numeric} values, got {y_ref.size}")
    expand = float(_pick(args.box_expand, section, "box_expand", 0.05))
    box = default_box(model, expand)
    categories = {}
    cat_specs = [s for s in model.target_specs if s.kind == CATEGORICAL]
    for item in args.category or []:
        if "=" not in item:
            raise CliError(f"--category expects NAME=VALUE, got {item!r}")
        name, value = item.split("=", 1)
        idx = [i for i, s in enumerate(cat_specs) if s.name == name]
        if not idx:
            raise CliError(f"unknown categorical target {name!r}")
        spec = cat_specs[idx[0]]
        if value not in [str(c) for c in spec.categories]:
            raise CliError(f"unknown category {value!r} of {name!r}")
        categories[idx[0]] = [str(c) for c in spec.categories].index(value)
    return y_ref, box, categories, section


def cmd_optimize(args, cfg):
    from .mip import optimize_tracking, write_lp

    _require_file(args.model, "model file")
    model = ParcModel.load(args.model)
    y_ref, box, categories, section = _tracking_inputs(args, cfg, model)
    gap = float(_pick(args.gap, section, "gap", 1e-9))
    node_limit = int(_pick(args.node_limit, section, "node_limit", 10000))
    result = optimize_tracking(model, y_ref, box, categories or None, gap, node_limit)
    outputs = []
    if args.export_lp:
        write_lp(result.milp, args.export_lp)
        outputs.append(args.export_lp)
    out = {"status": result.status, "epsilon": result.epsilon,
           "nodes": result.solution.nodes}
    if result.x_star is not None:
        out.update(x_star=result.x_star, y_hat=result.y_hat, region=result.region,
                   categories=category_values(model, np.atleast_2d(result.categories))[0]
                   if model.n_classes else [])
    _print_json(out)
    if result.x_star is None:
        raise CliError(f"no solution: {result.status}")
    write_manifest(_manifest_path(args, args.export_lp), "optimize", _options(args),
                   model.config.get("seed"), outputs)


def cmd_export_lp(args, cfg):
    from .mip import build_tracking_milp, write_lp

    _require_file(args.model, "model file")
    model = ParcModel.load(args.model)
    y_ref, box, categories, _ = _tracking_inputs(args, cfg, model)
    milp = build_tracking_milp(model, y_ref, box, categories or None)
    write_lp(milp, args.out)
    print(f"wrote {milp.n_vars} variables and {milp.n_rows} rows to {args.out}")
    write_manifest(_manifest_path(args, args.out), "export-lp", _options(args),
                   model.config.get("seed"), [args.out])


def cmd_benchmark(args, cfg):
    from .synthetic import format_table, run_benchmark

    section = cfg.get("benchmark") or {}
    base = parc_config(args, cfg)
    reps = int(_pick(args.repetitions, section, "repetitions", 20))
    Ks = _pick(args.Ks, section, "Ks")
    sigmas = _pick(args.sigmas, section, "sigmas")
    seps = _pick(args.separations, section, "separations")
    rows = run_benchmark(args.experiment, reps, Ks, sigmas, seps,
                         int(_pick(args.n_samples, section, "n_samples", 1000)),
                         seed=base.seed, base_config=base)
    print(format_table(rows))
    outputs = []
    if args.out:
        header = list(rows[0])
        write_csv(args.out, header, [[r[h] for h in header] for r in rows])
        outputs.append(args.out)
    write_manifest(_manifest_path(args, args.out), "benchmark", _options(args), base.seed,
                   outputs, base.to_dict())


# -- parser --------------------------------------------------------------

def _add_common(p):
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--manifest", help="where to write the run manifest")
    p.add_argument("--seed", type=int, help=f"random seed (default {DEFAULT_SEED})")


def _add_parc_flags(p):
    g = p.add_argument_group("PARC options")
    for name, kind in _PARC_FLAGS.items():
        flag = "--" + name.replace("_", "-") if name != "K" else "-K"
        g.add_argument(flag, dest=name, type=kind, help=_PARC_HELP[name])


def _add_data_flags(p):
    p.add_argument("--data", required=True, help="CSV file")
    p.add_argument("--target", action="append", help="target column (repeatable)")


def _add_tracking_flags(p):
    p.add_argument("--model", required=True)
    p.add_argument("--y-ref", type=float, nargs="+", help="reference for the numeric targets")
    p.add_argument("--box-expand", type=float, help="relative widening of the training box (default 0.05)")
    p.add_argument("--category", action="append", help="pin a categorical output, NAME=VALUE")


def build_parser():
    parser = argparse.ArgumentParser(prog="parc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    _add_common(p)
    p.add_argument("--experiment", choices=("pwa", "nonlinear"), required=True)
    p.add_argument("--n-samples", type=int, default=1000)
    p.add_argument("--low", type=float, default=0.0, help="nonlinear sampling box lower edge")
    p.add_argument("--high", type=float, default=1.0, help="nonlinear sampling box upper edge")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="train a model")
    _add_common(p)
    _add_data_flags(p)
    _add_parc_flags(p)
    p.add_argument("--test-fraction", type=float, help="hold out this fraction for testing")
    p.add_argument("--model", required=True, help="output model file (JSON)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict from a CSV of features")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a model on a labelled CSV")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--results", help="CSV to append metric rows to")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("select-k", help="choose K by cross-validation")
    _add_common(p)
    _add_data_flags(p)
    _add_parc_flags(p)
    p.add_argument("--k-range", default="1:8", help="'lo:hi' or comma list")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--out", help="CSV of scores per K")
    p.set_defaults(func=cmd_select_k)

    p = sub.add_parser("optimize", help="solve the tracking MILP")
    _add_common(p)
    _add_tracking_flags(p)
    p.add_argument("--gap", type=float, help="absolute optimality gap (default 1e-9)")
    p.add_argument("--node-limit", type=int, help="branch-and-bound node cap (default 10000)")
    p.add_argument("--export-lp", metavar="PATH", help="also write the MILP in LP format")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("export-lp", help="write the tracking MILP in CPLEX LP format")
    _add_common(p)
    _add_tracking_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_lp)

    p = sub.add_parser("benchmark", help="repeat the synthetic experiments")
    _add_common(p)
    _add_parc_flags(p)
    p.add_argument("--experiment", choices=("pwa", "nonlinear"), required=True)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--n-samples", type=int)
    p.add_argument("--Ks", type=int, nargs="+")
    p.add_argument("--sigmas", type=float, nargs="+")
    p.add_argument("--separations", nargs="+", choices=("softmax", "voronoi"))
    p.add_argument("--out", help="CSV of result rows")
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(getattr(args, "config", None))
        args.func(args, cfg)
    except (CliError, DataError, ValueError, KeyError, OSError, yaml.YAMLError) as exc:
        message = str(exc).strip().splitlines()[0] if str(exc).strip() else type(exc).__name__
        print(json.dumps({"error": type(exc).__name__, "message": message}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
