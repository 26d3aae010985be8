"""Command-line interface: ``sparsemkl {solve,diagnose,experiment,gen-data}``.

Every run writes one JSON report (to ``--out`` or stdout) with the keys
``command``, ``config`` (the merged settings actually used), ``result`` and
``error``. The exit status is 0 exactly when ``error`` is null.

Settings come from built-in defaults, then a ``key = value`` config file
(``--config``), then command-line flags; later sources win.
"""

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .datagen import STRUCTURES, SyntheticSpec, generate, holdout_split, load_dataset, save_dataset
from .diagnostics import dependency_report, fit_rate, gamma_probe, gen_bound, required_d, tau
from .errors import EnumerationInfeasibleError, SparseMKLError, ValidationError
from .kernels import KernelBank, check_gram, gram, load_specs, normalize, parse_inline_specs, save_specs
from .objective import Expansion, empirical_loss, norms_by_kernel, total_norm
from .oracles import (
    best_subset, counterexample_harness, full_group_lasso, global_min_loss, orthogonal_epsilon_star,
    two_stage,
)
from .solver_l1 import L1Config, solve_l1, theorem1_gap_bound
from .solver_l2 import L2Config, solve_l2

log = logging.getLogger("sparsemkl")

ALGOS = ("l2_greedy", "l1_greedy", "two_stage", "oracle")
EXPERIMENTS = ("counterexample", "rate_check", "theorem1_check")

DEFAULTS = {
    "format": "csv",
    "algo": "l2_greedy",
    "d": 5,
    "seed": 0,
    "threads": 1,
    "holdout": 0.0,
    "samples": 1000,
    "mu_grid": "1.5,2,3,5",
    "inner_tol": 1e-8,
    "inner_max_iter": 10000,
    "step_scale": 1.0,
    "experiment": "counterexample",
    "reps": 20,
    "n_samples": 200,
    "n_kernels": 50,
    "support": 5,
    "noise": 0.1,
    "signal": 0.15,
    "structure": "orthogonal_ranges",
    "plateau_mu": 10.0,
    "r2_threshold": 0.95,
}

# key -> converter; anything not listed stays a string
CONVERT = {
    "d": int, "seed": int, "threads": int, "samples": int, "inner_max_iter": int, "reps": int,
    "n_samples": int, "n_kernels": int, "support": int,
    "lambda": float, "holdout": float, "inner_tol": float, "step_scale": float, "A": float,
    "R": float, "epsilon_star": float, "noise": float, "signal": float, "plateau_mu": float,
    "r2_threshold": float,
}


def read_config_file(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, val = line.partition("=")
        if not eq or not key.strip():
            raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
        out[key.strip().replace("-", "_")] = val.strip()
    return out


def _coerce(cfg):
    out = {}
    for k, v in cfg.items():
        if v is None:
            continue
        conv = CONVERT.get(k)
        try:
            out[k] = conv(v) if conv and isinstance(v, str) else v
        except ValueError:
            raise ValidationError(f"config key {k!r}: cannot convert {v!r}") from None
    return out


# defaults that apply to each subcommand
COMMAND_KEYS = {
    "solve": ("format", "algo", "d", "seed", "threads", "holdout", "inner_tol", "inner_max_iter", "step_scale"),
    "diagnose": ("format", "d", "seed", "threads", "samples", "mu_grid"),
    "experiment": ("experiment", "seed", "threads", "reps", "inner_tol", "n_samples", "n_kernels",
                   "support", "noise", "signal", "plateau_mu", "r2_threshold"),
    "gen-data": ("format", "seed", "n_samples", "n_kernels", "support", "noise", "signal", "structure"),
}


def merge_config(args):
    """Defaults < config file < flags."""
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("command", "config", "verbose")}
    cfg = {k: DEFAULTS[k] for k in COMMAND_KEYS[args.command]}
    if args.config:
        cfg.update(read_config_file(args.config))
    cfg.update(flags)
    return _coerce(cfg)


def build_parser():
    p = argparse.ArgumentParser(prog="sparsemkl", description="Sparse multiple kernel learning by greedy coordinate descent.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        # defaults are None so that unset flags do not override the config file
        sp.add_argument("--config", help="key = value settings file")
        sp.add_argument("--out", help="report path (default: stdout)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int)
        sp.add_argument("-v", "--verbose", action="store_true")

    def data(sp):
        sp.add_argument("--data", help="dataset file")
        sp.add_argument("--format", choices=("csv", "sparse_labeled"))
        sp.add_argument("--kernels", help="inline kernel list or JSON spec file")
        sp.add_argument("--d", type=int)

    s = sub.add_parser("solve", help="run a solver and report its trace")
    common(s)
    data(s)
    s.add_argument("--algo", choices=ALGOS)
    s.add_argument("--lambda", dest="lambda", type=float)
    s.add_argument("--holdout", type=float, help="fraction of rows held out for a test loss")
    s.add_argument("--inner-tol", dest="inner_tol", type=float)
    s.add_argument("--step-scale", dest="step_scale", type=float)

    g = sub.add_parser("diagnose", help="dependence constants and bound formulas")
    common(g)
    data(g)
    g.add_argument("--samples", type=int, help="gamma probe samples")
    g.add_argument("--mu-grid", dest="mu_grid", help="comma-separated mu values for tau")
    g.add_argument("--A", dest="A", type=float)
    g.add_argument("--R", dest="R", type=float)
    g.add_argument("--epsilon-star", dest="epsilon_star", type=float)

    e = sub.add_parser("experiment", help="built-in checks")
    common(e)
    e.add_argument("--experiment", choices=EXPERIMENTS)
    e.add_argument("--d", type=int)
    e.add_argument("--lambda", dest="lambda", type=float)
    e.add_argument("--reps", type=int)
    e.add_argument("--losses", help="comma-separated loss sequence for rate_check")

    d = sub.add_parser("gen-data", help="write a synthetic dataset and kernel spec file")
    common(d)
    d.add_argument("--samples", dest="n_samples", type=int)
    d.add_argument("--kernels", dest="n_kernels", type=int)
    d.add_argument("--support", type=int)
    d.add_argument("--noise", type=float)
    d.add_argument("--signal", type=float)
    d.add_argument("--structure", choices=STRUCTURES)
    d.add_argument("--format", choices=("csv", "sparse_labeled"))
    return p


def _specs(cfg):
    text = cfg.get("kernels")
    if not text:
        raise ValidationError("no kernels given (--kernels)")
    if Path(text).is_file():
        return load_specs(text)
    return parse_inline_specs(text)


def _load(cfg):
    if not cfg.get("data"):
        raise ValidationError("no dataset given (--data)")
    return load_dataset(cfg["data"], cfg["format"])


def build_bank(specs, X, train=None):
    """Normalized bank on the ``train`` rows plus cross-kernel blocks to the other rows.

    Kernels are evaluated on all rows and normalized before slicing, so
    the training block equals the bank built on the training rows alone.
    """
    n = X.shape[0]
    train = np.arange(n) if train is None else np.asarray(train)
    test = np.setdiff1d(np.arange(n), train)
    mats, cross = [], []
    for s in specs:
        K = normalize(gram(s, X)).entries
        Kt = K[np.ix_(train, train)]
        check_gram(Kt)
        mats.append(Kt)
        cross.append(K[np.ix_(test, train)])
    bank = KernelBank([s.id for s in specs], mats, specs=list(specs))
    return bank, dict(zip(bank.ids, cross)), test


def _expansion_report(f, bank, y):
    return {
        "support": f.support,
        "norms": norms_by_kernel(f, bank),
        "total_norm": total_norm(f, bank),
        "empirical_loss": empirical_loss(f, bank, y),
    }


def cmd_solve(cfg):
    data = _load(cfg)
    specs = _specs(cfg)
    train, _ = holdout_split(data.n, cfg["holdout"], cfg["seed"])
    bank, cross, test = build_bank(specs, data.X, train)
    y = data.y[train]
    algo, d = cfg["algo"], cfg["d"]
    threads = cfg["threads"]
    result = {"algo": algo, "n_train": int(train.size), "n_test": int(test.size)}
    if algo in ("l1_greedy", "two_stage") and "lambda" not in cfg:
        raise ValidationError(f"--lambda is required for {algo}")
    if algo == "l2_greedy":
        f, trace = solve_l2(bank, y, L2Config(d, cfg["step_scale"], threads=threads))
        result["trace"] = trace.to_dict()
        result["exit_reason"] = trace.stop_reason
    elif algo == "l1_greedy":
        f, trace, why = solve_l1(bank, y, L1Config(cfg["lambda"], d, cfg["inner_tol"], cfg["inner_max_iter"], threads))
        result["trace"] = trace.to_dict()
        result["exit_reason"] = why
    elif algo == "two_stage":
        support, f = two_stage(bank, y, cfg["lambda"], d)
        result["selected"] = support
    else:
        res = best_subset(bank, y, d)
        _, f = global_min_loss(bank.subset(res.best_support), y)
        result.update(f_star_loss=res.f_star_loss, f_hat_loss=res.f_hat_loss, epsilon_star=res.epsilon_star)
    result.update(_expansion_report(f, bank, y))
    if test.size:
        pred = np.zeros(test.size)
        for kid, a in f.coefficients.items():
            pred += cross[kid] @ a
        r = pred - data.y[test]
        result["holdout_loss"] = float(r @ r) / (2 * test.size)
    return result


def _omitted(reason, message):
    return {"omitted": reason, "message": message}


def cmd_diagnose(cfg):
    data = _load(cfg)
    bank, _, _ = build_bank(_specs(cfg), data.X)
    d, m, n = cfg["d"], len(bank), bank.n
    rep = dependency_report(bank, d)
    rep2 = dependency_report(bank, 2 * d)
    J = bank.ids[: min(d, m)]
    result = {
        "dependency": rep.to_dict(),
        "dependency_2d": rep2.to_dict(),
        "gamma_probe": {"value": gamma_probe(bank, J, cfg["samples"], cfg["seed"]), "kernels": J,
                        "samples": cfg["samples"], "seed": cfg["seed"]},
    }
    mus = [float(x) for x in str(cfg["mu_grid"]).split(",") if x.strip()]
    if rep2.gamma_bound_valid:
        result["tau"] = {str(mu): tau(mu, rep2.gamma_bound) for mu in mus}
    else:
        result["tau"] = _omitted("gamma_bound_invalid", "no finite bound on gamma(2d)")
    eps = cfg.get("epsilon_star")
    if eps is None:
        try:
            eps = best_subset(bank, data.y, d).epsilon_star
            result["epsilon_star_source"] = "best_subset"
        except EnumerationInfeasibleError as exc:
            result["epsilon_star_source"] = _omitted("enumeration_infeasible", str(exc))
    else:
        result["epsilon_star_source"] = "config"
    result["epsilon_star"] = eps
    if eps is None:
        result["required_d"] = _omitted("epsilon_star_unavailable", "pass --epsilon-star")
    elif eps <= 0:
        result["required_d"] = _omitted("epsilon_star_zero", "requirement undefined for eps* = 0")
    elif not rep2.gamma_bound_valid:
        result["required_d"] = _omitted("gamma_bound_invalid", "no finite bound on gamma(2d)")
    else:
        val, vacuous = required_d(rep2.gamma_bound, eps)
        result["required_d"] = {"value": val, "vacuous": vacuous, "satisfied": vacuous or d >= val}
    if "A" in cfg and "R" in cfg:
        result["gen_bound"] = gen_bound(cfg["R"], d, m, n, cfg["A"], eps or 0.0)
    else:
        result["gen_bound"] = _omitted("missing_parameters", "pass --A and --R")
    return result


def _rate_check(cfg):
    if cfg.get("losses"):
        losses = [float(x) for x in str(cfg["losses"]).split(",") if x.strip()]
        fit = fit_rate(losses, 0.0)
        return {"fit": vars(fit), "pass": fit.rate < 1 and fit.r_squared >= cfg["r2_threshold"]}
    spec = SyntheticSpec(cfg["n_samples"], cfg["n_kernels"], cfg["support"], cfg["noise"],
                         "orthogonal_ranges", cfg["seed"], cfg["signal"])
    d = cfg.get("d", 25)
    data, bank, _ = generate(spec)
    f_star, _ = global_min_loss(bank, data.y)
    eps = orthogonal_epsilon_star(bank, data.y, d)
    _, trace = solve_l2(bank, data.y, L2Config(d, threads=cfg["threads"]))
    fit = fit_rate(trace, cfg["plateau_mu"] * eps, f_star)
    ok = fit.rate < 1 and fit.r_squared >= cfg["r2_threshold"] and fit.plateau_level <= 6 * eps + 1e-6
    return {"spec": vars(spec), "d": d, "f_star_loss": f_star, "epsilon_star": eps,
            "fit": vars(fit), "pass": bool(ok)}


def _theorem1_check(cfg):
    lam = cfg.get("lambda", 0.05)
    d = cfg.get("d", 5)
    tol = cfg["inner_tol"]
    rows, ok = [], 0
    for rep in range(cfg["reps"]):
        seed = cfg["seed"] + rep
        data, bank, _ = generate(SyntheticSpec(60, 8, 3, 0.2, "random_rbf_bank", seed, 1.0))
        f, _, why = solve_l1(bank, data.y, L1Config(lam, d, tol))
        full = full_group_lasso(bank, data.y, lam, tol=1e-10)
        obj = empirical_loss(f, bank, data.y) + lam * total_norm(f, bank)
        obj_full = empirical_loss(full, bank, data.y) + lam * total_norm(full, bank)
        bound = theorem1_gap_bound(total_norm(full, bank), d) if d >= 2 else math.inf
        good = obj - obj_full <= bound + 3 * tol
        ok += good
        rows.append({"seed": seed, "gap": obj - obj_full, "bound": bound, "exit_reason": why, "pass": bool(good)})
    return {"lambda": lam, "d": d, "runs": rows, "satisfied": ok, "total": len(rows), "pass": ok == len(rows)}


def cmd_experiment(cfg):
    name = cfg["experiment"]
    if name == "counterexample":
        out = counterexample_harness(cfg["seed"])
        out["pass"] = bool(out["two_stage_flipped"] and out["alg2_same_family"])
        return out
    if name == "rate_check":
        return _rate_check(cfg)
    if name == "theorem1_check":
        return _theorem1_check(cfg)
    raise ValidationError(f"unknown experiment {name!r}")


def cmd_gen_data(cfg):
    if not cfg.get("out"):
        raise ValidationError("gen-data needs --out DIR")
    spec = SyntheticSpec(cfg["n_samples"], cfg["n_kernels"], cfg["support"], cfg["noise"],
                         cfg["structure"], cfg["seed"], cfg["signal"])
    data, bank, truth = generate(spec)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    ext = "csv" if cfg["format"] == "csv" else "txt"
    save_dataset(data, out / f"data.{ext}", cfg["format"])
    save_specs(bank.specs, out / "kernels.json")
    truth_doc = {"spec": vars(spec), "support": truth.support, "clean_loss": truth.clean_loss,
                 "target": truth.target.tolist(), **truth.extra}
    (out / "truth.json").write_text(json.dumps(truth_doc, indent=2) + "\n")
    return {"files": [str(out / f"data.{ext}"), str(out / "kernels.json"), str(out / "truth.json")],
            "n": data.n, "p": int(data.X.shape[1]), "m": len(bank), "support": truth.support}


COMMANDS = {"solve": cmd_solve, "diagnose": cmd_diagnose, "experiment": cmd_experiment, "gen-data": cmd_gen_data}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, Expansion):
        return x.to_dict()
    return x


def error_object(exc):
    obj = {"kind": getattr(exc, "kind", type(exc).__name__), "type": type(exc).__name__, "message": str(exc)}
    for attr in ("clause", "diagnostics", "residual"):
        if hasattr(exc, attr):
            obj[attr] = getattr(exc, attr)
    return obj


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    report = {"command": args.command, "version": __version__, "config": None, "result": None, "error": None}
    try:
        cfg = merge_config(args)
        report["config"] = cfg
        report["result"] = COMMANDS[args.command](cfg)
    except (SparseMKLError, OSError) as exc:
        report["error"] = error_object(exc)
    text = json.dumps(_jsonable(report), indent=2) + "\n"
    dest = report["config"].get("out") if report["config"] else None
    if dest and args.command != "gen-data":
        Path(dest).write_text(text)
    else:
        sys.stdout.write(text)
    return 0 if report["error"] is None else 1


if __name__ == "__main__":
    sys.exit(main())
