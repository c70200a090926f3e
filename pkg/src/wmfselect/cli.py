"""Command-line interface: ``select``, ``simulate``, ``screen`` and ``classify``.

Every command writes ``manifest.json`` next to its results. Passing that
file back with ``--config`` reproduces the run; explicit flags override
config values, which override built-in defaults.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import __version__
from .core import DEFAULT_RIDGE_GRID, Dataset
from .errors import InputError, NumericalError
from .glm import GlmDataset, default_dn, glm_mcv, glm_path, predict_proba, sis_screen, stable_logistic_fit
from .io import load_csv, read_json, write_json, write_table
from .resampling import derive_seed
from .selection import CvConfig, full_path
from .simulation import (
    METRIC_NAMES,
    MethodSettings,
    default_methods,
    get_scenario,
    penalty_for,
    population_snr,
    run_methods,
    run_replications,
    scenario_dims,
)

logger = logging.getLogger("wmfselect")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

_COMMON = {
    "penalty": "alasso",
    "bootstrap": "paired",
    "B": 100,
    "K": 10,
    "gamma": 1.0,
    "lambda2": None,
    "lambda2_grid": list(DEFAULT_RIDGE_GRID),
    "c": 1.0,
    "seed": None,
    "max_steps": None,
}

DEFAULTS = {
    "select": dict(_COMMON, input=None, response=None, method="wmf", family="auto"),
    "simulate": dict(_COMMON, scenario="1", n=[100, 300, 500], R=100, methods=None, penalty=None, bootstrap=None),
    "screen": {"input": None, "response": None, "dn": None},
    "classify": dict(_COMMON, train=None, test=None, response=None, dn=None, max_steps=200, family="linear",
                     methods=["wmf", "cv-1se", "cp", "bic", "ebic", "gic"]),
}

LABELS = {"wmf": "WMF", "mf": "MF", "cv-1se": "CV", "cv-min": "CV-min", "cp": "Cp", "bic": "BIC",
          "ebic": "EBIC", "gic": "GIC"}


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _str_list(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def _add_common(p):
    S = argparse.SUPPRESS
    p.add_argument("--penalty", choices=["alasso", "aenet"], default=S,
                   help="adaptive LASSO or adaptive Elastic-Net path")
    p.add_argument("--bootstrap", choices=["paired", "residual"], default=S)
    p.add_argument("-B", type=int, default=S, help="bootstrap samples (default 100)")
    p.add_argument("-K", type=int, default=S, help="CV folds (default 10)")
    p.add_argument("--gamma", type=float, default=S, help="adaptive weight exponent (default 1)")
    p.add_argument("--lambda2", type=float, default=S,
                   help="fixed ridge level for aenet; default is BIC-tuned over --lambda2-grid")
    p.add_argument("--lambda2-grid", dest="lambda2_grid", type=_float_list, default=S,
                   help="comma-separated ridge grid for pilots and aenet tuning")
    p.add_argument("--c", type=float, default=S, help="softmax temperature constant (default 1)")
    p.add_argument("--seed", type=int, default=S, help="master seed (required)")
    p.add_argument("--max-steps", dest="max_steps", type=int, default=S, help="path step cap")


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="wmfselect", description="Bootstrap frequency model selection.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common_io(p):
        p.add_argument("--config", help="manifest.json of an earlier run")
        p.add_argument("--out", default="results", help="output directory (default ./results)")
        p.add_argument("--threads", type=int, default=1, help="worker processes (results do not depend on it)")

    p = sub.add_parser("select", help="select variables on a CSV dataset")
    p.add_argument("input", nargs="?", default=S, help="CSV file with a header row")
    p.add_argument("--response", default=S, help="response column (default 'y', else the last column)")
    p.add_argument("--method", choices=["wmf", "mf", "bic", "ebic", "gic", "cp", "cv-min", "cv-1se"], default=S)
    p.add_argument("--family", choices=["auto", "linear", "logistic"], default=S,
                   help="auto uses logistic for 0/1 responses")
    _add_common(p)
    common_io(p)

    p = sub.add_parser("simulate", help="run a simulation scenario")
    p.add_argument("--scenario", choices=["1", "2", "3", "4", "5", "6", "glm"], default=S)
    p.add_argument("--n", type=_int_list, default=S, help="comma-separated sample sizes (default 100,300,500)")
    p.add_argument("-R", type=int, default=S, help="replications per n (default 100)")
    p.add_argument("--methods", type=_str_list, default=S, help="comma-separated methods")
    _add_common(p)
    common_io(p)

    p = sub.add_parser("screen", help="sure independence screening")
    p.add_argument("input", nargs="?", default=S)
    p.add_argument("--response", default=S)
    p.add_argument("--dn", type=int, default=S, help="variables to keep (default floor(n/log n))")
    common_io(p)

    p = sub.add_parser("classify", help="screen, select and classify with a train/test split")
    p.add_argument("--train", default=S)
    p.add_argument("--test", default=S)
    p.add_argument("--response", default=S)
    p.add_argument("--dn", type=int, default=S)
    p.add_argument("--methods", type=_str_list, default=S)
    p.add_argument("--family", choices=["linear", "logistic"], default=S,
                   help="selection path family; the final classifier is always a logistic refit")
    _add_common(p)
    common_io(p)
    return parser


def resolve_settings(args) -> dict:
    """Merge defaults, config file and explicit flags, in increasing priority."""
    settings = dict(DEFAULTS[args.command])
    if args.config:
        manifest = read_json(args.config)
        if manifest.get("command") != args.command:
            raise InputError(f"config {args.config} is for command {manifest.get('command')!r}, not {args.command!r}")
        for k, v in manifest.get("settings", {}).items():
            if k not in settings:
                raise InputError(f"config {args.config}: unknown setting {k!r}")
            settings[k] = v
    for k in settings:
        if k in vars(args):
            settings[k] = getattr(args, k)
    return settings


def _require(settings, *keys):
    for k in keys:
        if settings.get(k) is None:
            raise InputError(f"--{k.replace('_', '-')} is required (flag or config)")


def _method_settings(s, threads, penalty=None, bootstrap=None) -> MethodSettings:
    if s["B"] < 1:
        raise InputError("-B must be >= 1")
    return MethodSettings(
        penalty=penalty or s["penalty"],
        bootstrap=bootstrap or s["bootstrap"],
        B=int(s["B"]),
        cv=CvConfig(int(s["K"]), float(s["c"])),
        gamma=float(s["gamma"]),
        lambda2=None if s["lambda2"] is None else float(s["lambda2"]),
        lambda2_grid=tuple(float(v) for v in s["lambda2_grid"]),
        max_steps=None if s["max_steps"] is None else int(s["max_steps"]),
        n_jobs=threads,
    )


def _names(data: Dataset):
    return data.names or tuple(f"x{j + 1}" for j in range(data.p))


def _path_rows(path, names):
    rows = []
    for pt in path.points:
        active = ";".join(names[j] for j in pt.active_set)
        rows.append([pt.step, pt.lam, pt.size, active, pt.coefficients.intercept] + list(pt.coefficients.values))
    return ["step", "lambda", "size", "active", "intercept"] + list(names), rows


def _manifest(command, settings, extra=None):
    m = {"command": command, "version": __version__, "settings": settings}
    if extra:
        m["derived"] = extra
    return m


def _is_logistic(data, family):
    if family == "logistic":
        if not isinstance(data, GlmDataset):
            raise InputError("logistic family needs a 0/1 response with both classes")
        return True
    return family == "auto" and isinstance(data, GlmDataset)


def cmd_select(s, out, threads):
    _require(s, "input", "seed")
    data = load_csv(s["input"], s["response"])
    names = _names(data)
    logistic = _is_logistic(data, s["family"])
    ms = _method_settings(s, threads)
    method = s["method"]
    res = run_methods(data, [method], ms, int(s["seed"]), "logistic" if logistic else "gaussian")[method]
    if res is None:
        raise NumericalError(f"method {method} failed on {s['input']}")
    if logistic:
        path = glm_path(data, ms.gamma)
        pen = {"family": "logistic", "scheme": "adaptive-lasso", "gamma": ms.gamma, "lambda2": 0.0}
    else:
        penalty = penalty_for(data, ms)
        path = full_path(data, penalty, ms.max_steps, True, ms.lambda2_grid)
        pen = {"family": "linear", "scheme": penalty.scheme, "gamma": penalty.gamma, "lambda2": penalty.lambda2}
    diag = {k: v for k, v in res.diagnostics.items()}
    selection = {
        "method": method,
        "dimension": res.dimension,
        "model": list(res.model),
        "model_names": [names[j] for j in res.model],
        "lambda": res.lam,
        "penalty": pen,
        "n": data.n,
        "p": data.p,
        "diagnostics": diag,
    }
    write_json(os.path.join(out, "selection.json"), selection)
    header, rows = _path_rows(path, names)
    write_table(os.path.join(out, "path.csv"), header, rows)
    if method in ("wmf", "mf"):
        d = res.diagnostics
        table = res.table
        prof = []
        for i, j in enumerate(d["dims"]):
            model = table.model(int(j))
            cells = [int(j), d["mf_freq"][i]]
            if method == "wmf":
                cells += [d["mcv"][i], d["weight"][i], d["wmf"][i]]
            cells.append("" if model is None else ";".join(names[k] for k in model))
            prof.append(cells)
        header = ["j", "mf_freq"] + (["mcv", "weight", "wmf"] if method == "wmf" else []) + ["model"]
        write_table(os.path.join(out, "wmf_profile.csv"), header, prof)
    write_json(os.path.join(out, "manifest.json"), _manifest("select", s))
    print(f"{method}: selected {len(res.model)} variable(s): {', '.join(selection['model_names']) or '(none)'}")


def cmd_simulate(s, out, threads):
    _require(s, "seed")
    spec = get_scenario(s["scenario"])
    n_list = [int(n) for n in s["n"]]
    if not n_list:
        raise InputError("--n needs at least one sample size")
    methods = s["methods"] or list(default_methods(spec))
    ms = _method_settings(s, 1, s["penalty"] or spec.penalty, s["bootstrap"] or spec.bootstrap)
    summaries = run_replications(spec, methods, n_list, int(s["R"]), int(s["seed"]), ms, n_jobs=threads)
    dims = {n: scenario_dims(spec, n) for n in n_list}
    rows = []
    for m in summaries:
        p, p0, _ = dims[m.n]
        for metric in METRIC_NAMES:
            rows.append([spec.id, m.n, p, p0, m.method, metric, getattr(m, metric), m.runs])
    write_table(os.path.join(out, "metrics.csv"), ["scenario", "n", "p", "p0", "method", "metric", "value", "runs"],
                rows)
    derived = {"p": [dims[n][0] for n in n_list], "p0": [dims[n][1] for n in n_list],
               "snr": [population_snr(spec, n) for n in n_list], "methods": list(methods)}
    write_json(os.path.join(out, "manifest.json"), _manifest("simulate", s, derived))
    for m in summaries:
        print(f"n={m.n:<5d} {m.method:<8s} correct={m.proportion_correct:.2f} size={m.avg_model_size:.2f}")


def cmd_screen(s, out, threads):
    _require(s, "input")
    data = load_csv(s["input"], s["response"])
    names = _names(data)
    dn = s["dn"] if s["dn"] is not None else default_dn(data.n)
    res = sis_screen(data.X, data.y, int(dn))
    rows = [[r + 1, j, names[j], res.scores[j]] for r, j in enumerate(res.kept)]
    write_table(os.path.join(out, "screen.csv"), ["rank", "index", "name", "score"], rows)
    write_json(os.path.join(out, "manifest.json"), _manifest("screen", s, {"dn": int(dn)}))
    print(f"kept {len(res.kept)} of {data.p} variables")


def cmd_classify(s, out, threads):
    _require(s, "train", "test", "seed")
    train = load_csv(s["train"], s["response"])
    test = load_csv(s["test"], s["response"])
    for name, d in (("train", train), ("test", test)):
        if not np.all((d.y == 0) | (d.y == 1)):
            raise InputError(f"{name} response must be coded 0/1")
    if not isinstance(train, GlmDataset):
        raise InputError("training response must contain both classes")
    names = _names(train)
    if _names(test) != names:
        raise InputError("train and test files must have the same columns")
    dn = min(int(s["dn"]) if s["dn"] is not None else default_dn(train.n), train.p)
    kept = list(sis_screen(train.X, train.y, dn).kept)
    tr = Dataset(train.X[:, kept], train.y, None, tuple(names[j] for j in kept))
    Xte = test.X[:, kept]
    ms = _method_settings(s, threads)
    family = s["family"]
    seed = int(s["seed"])
    if family == "logistic":
        tr = GlmDataset(tr.X, tr.y, None, tr.names)
    results = run_methods(tr, s["methods"], ms, seed, "logistic" if family == "logistic" else "gaussian")
    cv_seed = derive_seed(seed, 1, 0)
    table, preds, chosen = [], [], {}
    for m in s["methods"]:
        res = results[m]
        if res is None:
            table.append([LABELS.get(m, m), "", "", ""])
            continue
        model = list(res.model)
        if model:
            coef = stable_logistic_fit(Dataset(tr.X[:, model], tr.y))
            prob = predict_proba(coef, Xte[:, model])
        else:
            prob = np.full(test.n, tr.y.mean())
        labels = (prob > 0.5).astype(int)
        cv_err = int(round(glm_mcv(tr, model, ms.cv.K, "misclass", cv_seed) * tr.n))
        test_err = int(np.sum(labels != test.y))
        table.append([LABELS.get(m, m), f"{cv_err}/{tr.n}", f"{test_err}/{test.n}", len(model)])
        preds += [[m, i, prob[i], labels[i]] for i in range(test.n)]
        chosen[m] = [tr.names[j] for j in model]
    write_table(os.path.join(out, "classify.csv"), ["criteria", "ten_fold_cv_error", "test_error", "n_selected"],
                table)
    write_table(os.path.join(out, "predictions.csv"), ["method", "row", "probability", "label"], preds)
    write_json(os.path.join(out, "selection.json"), {"screened": [names[j] for j in kept], "selected": chosen})
    write_json(os.path.join(out, "manifest.json"), _manifest("classify", s, {"dn": dn}))
    for row in table:
        print(",".join(str(c) for c in row))


COMMANDS = {"select": cmd_select, "simulate": cmd_simulate, "screen": cmd_screen, "classify": cmd_classify}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads == 0:
            raise InputError("--threads must be nonzero")
        settings = resolve_settings(args)
        os.makedirs(args.out, exist_ok=True)
        COMMANDS[args.command](settings, args.out, args.threads)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
