"""Command-line surface: simulate / fit / evaluate / bootstrap.

Machine-readable output (JSON one-liners, CSV files) goes to stdout and the
requested paths; human summaries go to stderr.  Exit codes: 0 success,
1 validation problem, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import sys

import numpy as np

from . import io as model_io
from .errors import NumericalError, ValidationError
from .estimation import FitConfig, fit, overparam_check
from .metrics import evaluate_dataset
from .simulation import generate, make_setup, setup_names

_NO_INTERCEPT_NOTE = ("no intercept term: a constant feature effect is absorbed "
                      "by the hazard increment scale and the frailty mean")


def _emit(payload):
    print(json.dumps(payload, sort_keys=True))


def _say(message):
    print(message, file=sys.stderr)


def _add_simulate(sub):
    p = sub.add_parser("simulate", help="write a simulated panel CSV")
    p.add_argument("--setup", required=True, choices=list(setup_names()))
    p.add_argument("--n", type=int, default=None, help="subject count override")
    p.add_argument("--spells", type=int, default=None, help="spells per subject override")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--psi", type=float, default=1.0)
    p.add_argument("--ymax", type=float, default=80.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)


def _cmd_simulate(args):
    cfg = make_setup(args.setup, n=args.n, spells=args.spells,
                     seed=args.seed, psi=args.psi, y_max=args.ymax)
    ds = generate(cfg)
    model_io.write_panel_csv(ds, args.out)
    sidecar = {
        "setup": args.setup,
        "n": cfg.n,
        "spells": cfg.spells,
        "seed": cfg.seed,
        "psi": cfg.psi,
        "y_max": cfg.y_max,
        "hazard": repr(cfg.hazard),
        "frailty": repr(cfg.frailty),
        "feature_effect": repr(cfg.nonlinear) if cfg.nonlinear else list(cfg.beta),
    }
    with open(args.out + ".config.json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=1, sort_keys=True)
        fh.write("\n")
    _say(f"simulated setup {args.setup}: {ds.n_subjects} subjects, "
         f"{ds.n_spells} spells ({ds.n_events} events) -> {args.out}")
    _emit({"out": args.out, "subjects": ds.n_subjects,
           "spells": ds.n_spells, "events": ds.n_events})
    return 0


def _add_fit(sub):
    p = sub.add_parser("fit", help="fit the model to a panel CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--psi", type=float, required=True)
    p.add_argument("--config", default=None, help="JSON file with FitConfig overrides")
    p.add_argument("--out", required=True, help="model JSON path")
    p.set_defaults(func=_cmd_fit)


def _load_fit_config(path):
    if path is None:
        return FitConfig()
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    allowed = {"max_iters", "grad_tol", "rel_f_tol", "unit_mean_frailty"}
    unknown = set(raw) - allowed
    if unknown:
        raise ValidationError(f"unknown fit-config field(s) {sorted(unknown)}")
    return FitConfig(**raw)


def _cmd_fit(args):
    cfg = _load_fit_config(args.config)
    ds = model_io.read_panel_csv(args.data, args.psi)
    report = overparam_check(ds)
    model = fit(ds, cfg)
    provenance = {
        "seed": None,
        "data_hash": model_io.dataset_hash(ds),
        "config": {
            "max_iters": cfg.max_iters,
            "grad_tol": cfg.grad_tol,
            "rel_f_tol": cfg.rel_f_tol,
            "unit_mean_frailty": cfg.unit_mean_frailty,
        },
    }
    model_io.write_model(model, args.out, provenance=provenance)
    _say(f"fit: loglik {model.loglik:.6f} after {model.iterations} iterations "
         f"(converged={model.converged}, floored spells={model.clamp_count})")
    _say(report.summary())
    _say(_NO_INTERCEPT_NOTE)
    _emit({
        "out": args.out,
        "loglik": model.loglik,
        "iterations": model.iterations,
        "converged": model.converged,
        "clamp_count": model.clamp_count,
        "normalization": model.normalization,
        "alpha": model.alpha,
        "kappa": model.kappa,
        "beta": [float(b) for b in model.beta],
        "free_delta_count": int(model.free_mask.sum()),
        "negligible_free_increments": model.negligible_free_count(),
        "overparam": {
            "param_count": report.param_count,
            "spell_count": report.spell_count,
            "ratio": report.ratio,
            "warn": report.warn,
        },
        "note": _NO_INTERCEPT_NOTE,
    })
    if not model.converged:
        _say("warning: iteration cap reached before the tolerances were met")
    return 0


def _add_evaluate(sub):
    p = sub.add_parser("evaluate", help="score a fitted model on a panel CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--horizon", type=float, default=None,
                   help="Brier horizon (grid multiple); default: latest event cell")
    p.add_argument("--fresh-subjects", action="store_true",
                   help="score every spell as a first spell (ignore history)")
    p.set_defaults(func=_cmd_evaluate)


def _cmd_evaluate(args):
    model, _, _ = model_io.read_model(args.model)
    ds = model_io.read_panel_csv(args.data, model.psi)
    result = evaluate_dataset(model, ds, horizon=args.horizon,
                              condition_on_history=not args.fresh_subjects)
    _say(f"evaluate: C-index {result['c_index']:.4f}, IBS {result['ibs']:.4f} "
         f"over {result['records']} records (horizon {result['horizon']:g})")
    _emit(result)
    return 0


def _add_bootstrap(sub):
    p = sub.add_parser(
        "bootstrap",
        help="repeated simulate+fit cycles; per-coefficient mean and sd table")
    p.add_argument("--setup", required=True, choices=list(setup_names()))
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--spells", type=int, default=None)
    p.add_argument("--psi", type=float, default=1.0)
    p.add_argument("--ymax", type=float, default=80.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="summary CSV path")
    p.set_defaults(func=_cmd_bootstrap)


def _bootstrap_replicate(args, rep):
    # replicate seeds derive from the base seed by XOR with the counter
    cfg = make_setup(args.setup, n=args.n, spells=args.spells,
                     seed=args.seed ^ rep, psi=args.psi, y_max=args.ymax)
    ds = generate(cfg)
    return fit(ds)


def _cmd_bootstrap(args):
    if args.reps < 1:
        raise ValidationError("--reps must be >= 1")
    if args.workers < 1:
        raise ValidationError("--workers must be >= 1")
    if args.workers == 1:
        models = [_bootstrap_replicate(args, rep) for rep in range(args.reps)]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=args.workers) as pool:
            futures = [pool.submit(_bootstrap_replicate, args, rep)
                       for rep in range(args.reps)]
            models = [f.result() for f in futures]  # replicate order

    kept = [m for m in models if m.converged]
    excluded = len(models) - len(kept)
    if not kept:
        raise NumericalError("no bootstrap replicate converged")
    betas = np.array([m.beta for m in kept])
    means = betas.mean(axis=0)
    sds = betas.std(axis=0, ddof=1) if len(kept) > 1 else np.zeros(betas.shape[1])

    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["coefficient", "mean", "sd", "replicates"])
        for i in range(betas.shape[1]):
            writer.writerow([f"beta_{i + 1}", repr(float(means[i])),
                             repr(float(sds[i])), len(kept)])
    _say(f"bootstrap setup {args.setup}: {len(kept)}/{args.reps} replicates "
         f"converged ({excluded} excluded) -> {args.out}")
    for i in range(betas.shape[1]):
        _say(f"  beta_{i + 1}: {means[i]:.3f} ({sds[i]:.3f})")
    _emit({"out": args.out, "reps": args.reps, "converged": len(kept),
           "excluded": excluded,
           "mean": [float(v) for v in means], "sd": [float(v) for v in sds]})
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ffpsurv",
        description="Discrete-time recurrent-event survival analysis "
                    "with sequentially updated Gamma frailty.")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_simulate(sub)
    _add_fit(sub)
    _add_evaluate(sub)
    _add_bootstrap(sub)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help; anything else is a usage problem
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except ValidationError as exc:
        _say(f"validation error: {exc}")
        return 1
    except NumericalError as exc:
        _say(f"numerical failure: {exc}")
        return 2
    except OSError as exc:
        _say(f"i/o error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
