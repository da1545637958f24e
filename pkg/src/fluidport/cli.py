"""Command-line entry point.

Commands
    generate-data   build a dataset file (and optional CSV mirror)
    train           train a port classifier on a dataset file
    study           random-search HPO on a dataset file
    eval-op         outage probability of one policy
    curve-observed  OP vs observed ports for ideal / reference / model(J)
    curve-mrc       OP vs observed ports for combine counts K
    curve-fading    OP vs observed ports across fading parameters
    sweep-classes   OP table over (observed ports, class count M)

Configuration is a JSON file with namespaced keys, overridable per-flag with
``--set section.key=value``; every run writes a resolved-config snapshot next
to its outputs, and re-running from the snapshot reproduces them byte for
byte.  Exit codes: 0 success, 2 configuration, 3 missing/corrupt artifacts,
4 numeric failure.
"""

import argparse
import copy
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .channel import AntennaConfig, FadingParams
from .dataset import (
    DatasetFormatError,
    build_dataset,
    export_csv,
    load_dataset,
    relabel,
    save_dataset,
)
from .fama import PolicyJob, SystemConfig, estimate_outage_paired
from .hpo import SearchSpace, TrialConfig, class_count_sweep, fit_trial, run_study
from .nn import PortPredictor, load_predictor, save_model
from .selection import Policy, PortSets

__all__ = ["main", "dispatch", "ConfigError", "DEFAULT_CONFIG"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

CURVE_COLUMNS = [
    "m_observed",
    "policy",
    "j_budget",
    "k_combine",
    "alpha",
    "mu",
    "gamma_th_db",
    "op",
    "ci_low",
    "ci_high",
    "trials",
    "seed",
]

DEFAULT_CONFIG = {
    "channel": {"n_ports": 100, "aperture": 5.0, "alpha": 2.0, "mu": 2},
    "system": {
        "n_users": 2,
        "signal_power": 1.0,
        "noise_power": 1e-4,
        "gamma_th_db": -2.0,
        "interference_mode": "as_written",
    },
    "dataset": {"m_observed": 10, "m_labels": 3, "count": 10000},
    "train": {
        "ltc_units": 32,
        "dense_layers": [64],
        "learning_rate": 1e-3,
        "epochs": 60,
        "batch_size": 64,
        "loss": "bce",
        "patience": 8,
    },
    "hpo": {"budget": 20, "epochs": 40, "batch_size": 64, "patience": 6, "objective": "outage"},
    "eval": {
        "trials": 100000,
        "m_grid": [5, 10, 15, 20, 25, 30],
        "j_grid": [1, 2, 4],
        "k_grid": [1, 2, 4, 6],
        "alpha_grid": [2.0, 3.0],
        "mu_grid": [1, 2, 3],
        "sweep_rows": [5, 10, 15],
        "sweep_m": [1, 2, 3, 4, 5, 10],
        "sweep_budget": 3,
        "sweep_count": 2000,
    },
    "seed": 7,
    "workers": 1,
    "output_dir": None,
}

COMMANDS = (
    "generate-data",
    "train",
    "study",
    "eval-op",
    "curve-observed",
    "curve-mrc",
    "curve-fading",
    "sweep-classes",
)


class ConfigError(Exception):
    pass


def _merge_config(base, update, path=""):
    merged = copy.deepcopy(base)
    for key, value in update.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be a section")
            merged[key] = _merge_config(base[key], value, where + ".")
        else:
            merged[key] = value
    return merged


def _apply_set(config, assignment):
    if "=" not in assignment:
        raise ConfigError(f"--set expects section.key=value, got {assignment!r}")
    dotted, raw = assignment.split("=", 1)
    keys = dotted.split(".")
    node = config
    for key in keys[:-1]:
        if key not in node or not isinstance(node[key], dict):
            raise ConfigError(f"unknown config section {dotted!r}")
        node = node[key]
    leaf = keys[-1]
    if leaf not in node:
        raise ConfigError(f"unknown config key {dotted!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node[leaf] = value
    return config


def load_config(path=None, sets=(), seed=None, trials=None, workers=None, out=None):
    """Resolve defaults <- file <- --set flags <- dedicated flags."""
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config file: {exc}") from exc
        if "config" in data and "command" in data:
            data = data["config"]  # accept a run snapshot as-is
        config = _merge_config(config, data)
    for assignment in sets:
        config = _apply_set(config, assignment)
    if seed is not None:
        config["seed"] = seed
    if trials is not None:
        config["eval"]["trials"] = trials
    if workers is not None:
        config["workers"] = workers
    if out is not None:
        config["output_dir"] = out
    if config["output_dir"] is None:
        config["output_dir"] = os.environ.get("FLUIDPORT_OUTPUT_DIR", ".")
    return config


def _physics(config):
    antenna = AntennaConfig(
        n_ports=config["channel"]["n_ports"], aperture=config["channel"]["aperture"]
    )
    params = FadingParams(alpha=config["channel"]["alpha"], mu=config["channel"]["mu"])
    system = SystemConfig(**config["system"])
    return system, antenna, params


def _write_snapshot(out_path, command, config, args=None):
    record = {"command": command, "config": config}
    if args is not None:
        skip = {"config", "set", "seed", "trials", "workers", "out", "command"}
        record["args"] = {
            k: (str(v) if isinstance(v, Path) else v)
            for k, v in vars(args).items()
            if k not in skip
        }
    snapshot = Path(str(out_path) + ".config.json")
    snapshot.write_text(json.dumps(record, indent=2, sort_keys=True))


def _csv_cell(value):
    if isinstance(value, float):
        return repr(float(value))
    return value


def _write_curve_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVE_COLUMNS)
        for row in rows:
            writer.writerow([_csv_cell(row[c]) for c in CURVE_COLUMNS])


def _dataset_path(config, m_observed):
    return Path(config["output_dir"]) / f"dataset_m{m_observed}.fpds"


def _model_path(config, m_observed):
    return Path(config["output_dir"]) / f"model_m{m_observed}.fpwt"


def _load_predictors(config, m_values, models_dir=None):
    predictors = {}
    for m in m_values:
        path = Path(models_dir) / f"model_m{m}.fpwt" if models_dir else _model_path(config, m)
        if not path.exists():
            raise FileNotFoundError(f"missing model file {path} (run `train` for m={m})")
        predictors[m] = load_predictor(path)
    return predictors


def _curve_rows(config, jobs_meta, estimates):
    rows = []
    for meta, est in zip(jobs_meta, estimates):
        row = dict(meta)
        row.update(
            op=est.probability,
            ci_low=est.ci_low,
            ci_high=est.ci_high,
            trials=est.trials,
            seed=config["seed"],
        )
        rows.append(row)
    return rows


def cmd_generate_data(config, args):
    system, antenna, params = _physics(config)
    m_values = args.m or [config["dataset"]["m_observed"]]
    out_dir = Path(config["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    for m in m_values:
        dataset = build_dataset(
            system,
            antenna,
            params,
            m_observed=m,
            m_labels=config["dataset"]["m_labels"],
            count=config["dataset"]["count"],
            seed=config["seed"],
        )
        path = _dataset_path(config, m)
        save_dataset(dataset, path)
        if args.csv:
            export_csv(dataset, str(path) + ".csv")
        _write_snapshot(path, "generate-data", config, args)
        print(f"wrote {path} ({dataset.meta['counts']})")
    return EXIT_OK


def _train_on(config, dataset, seed, trial=None):
    tc = config["train"]
    if trial is None:
        trial = TrialConfig(
            ltc_units=tc["ltc_units"],
            dense_layers=tuple(tc["dense_layers"]),
            learning_rate=tc["learning_rate"],
            loss=tc["loss"],
            preprocessing="standardize",
            m_labels=dataset.meta["m_labels"],
        )
    clf, predictor = fit_trial(
        dataset,
        trial,
        seed,
        epochs=tc["epochs"],
        batch_size=tc["batch_size"],
        patience=tc["patience"],
    )
    return clf, predictor


def _save_predictor(path, predictor, history, dataset, seed):
    save_model(
        path,
        predictor.spec,
        predictor.weights,
        pipeline={
            "normalizers": [n.state_dict() for n in predictor.normalizers],
            "observed_indices": predictor.observed.tolist(),
            "n_ports": predictor.n_ports,
            "m_labels": predictor.m_labels,
        },
        seed=seed,
        training={
            "best_epoch": history.get("best_epoch"),
            "best_val_loss": history.get("best_val_loss"),
            "epochs_run": len(history.get("val_loss", [])),
            "dataset_seed": dataset.meta["seed"],
        },
    )


def cmd_train(config, args):
    dataset = load_dataset(args.dataset)
    trial = None
    if args.from_study:
        best = json.loads(Path(args.from_study).read_text())["config"]
        best["dense_layers"] = tuple(best["dense_layers"])
        trial = TrialConfig(**best)
        dataset = relabel(dataset, trial.m_labels)
    elif args.m_labels:
        dataset = relabel(dataset, args.m_labels)
    clf, predictor = _train_on(config, dataset, config["seed"], trial)
    out_dir = Path(config["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    path = args.output or _model_path(config, dataset.meta["m_observed"])
    _save_predictor(path, predictor, clf.history_, dataset, config["seed"])
    _write_snapshot(path, "train", config, args)
    print(f"wrote {path} (best val loss {clf.history_['best_val_loss']:.5f})")
    return EXIT_OK


def cmd_study(config, args):
    dataset = load_dataset(args.dataset)
    cache = {}

    def factory(m_labels):
        if m_labels not in cache:
            cache[m_labels] = relabel(dataset, m_labels)
        return cache[m_labels]

    hc = config["hpo"]
    space = SearchSpace()
    study = run_study(
        space,
        factory,
        budget=hc["budget"],
        master_seed=config["seed"],
        objective=hc["objective"],
        epochs=hc["epochs"],
        batch_size=hc["batch_size"],
        patience=hc["patience"],
    )
    out_dir = Path(config["output_dir"]) / f"study_m{dataset.meta['m_observed']}"
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, trial in enumerate(study.trials):
        (out_dir / f"trial_{i:03d}.json").write_text(
            json.dumps(
                {
                    "index": i,
                    "config": trial.config.to_dict(),
                    "objective": trial.objective,
                    "seed": trial.seed,
                    "elapsed_s": round(trial.elapsed, 3),
                    "error": trial.error,
                },
                sort_keys=True,
            )
        )
    best = study.best
    (out_dir / "best.json").write_text(
        json.dumps(
            {
                "index": study.best_index,
                "config": best.config.to_dict(),
                "objective": best.objective,
                "seed": best.seed,
            },
            sort_keys=True,
        )
    )
    if best.weights is not None:
        predictor = PortPredictor(
            best.spec,
            best.weights,
            best.normalizers,
            observed=dataset.observed,
            n_ports=dataset.meta["n_ports"],
            m_labels=best.config.m_labels,
        )
        _save_predictor(out_dir / "best_model.fpwt", predictor, best.history, dataset, best.seed)
    _write_snapshot(out_dir / "study", "study", config, args)
    print(f"best trial #{study.best_index}: objective {best.objective:.5f} ({best.config})")
    return EXIT_OK


def _estimate(config, jobs, system=None, antenna=None, params=None):
    if system is None:
        system, antenna, params = _physics(config)
    return estimate_outage_paired(
        [j[1] for j in jobs],
        system,
        antenna,
        params,
        trials=config["eval"]["trials"],
        master_seed=config["seed"],
        workers=config["workers"],
    )


def cmd_eval_op(config, args):
    system, antenna, params = _physics(config)
    n = antenna.n_ports
    m = args.m or config["dataset"]["m_observed"]
    ports = PortSets.uniform(n, m)
    if args.policy == "ideal":
        policy = Policy("ideal", k=args.k)
    elif args.policy == "reference":
        policy = Policy("reference", k=args.k)
    else:
        predictor = load_predictor(args.model) if args.model else _load_predictors(config, [m])[m]
        policy = Policy("model_assisted", lookup_budget=args.j, k=args.k, predictor=predictor)
    meta = {
        "m_observed": m,
        "policy": "model" if args.policy == "model" else args.policy,
        "j_budget": args.j if args.policy == "model" else 0,
        "k_combine": args.k,
        "alpha": params.alpha,
        "mu": params.mu,
        "gamma_th_db": system.gamma_th_db,
    }
    estimates = _estimate(config, [(meta, PolicyJob(args.policy, policy, ports))], system, antenna, params)
    out_dir = Path(config["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    path = args.output or out_dir / "eval_op.csv"
    _write_curve_csv(path, _curve_rows(config, [meta], estimates))
    _write_snapshot(path, "eval-op", config, args)
    print(f"wrote {path} (op {estimates[0].probability:.6f})")
    return EXIT_OK


def _curve_command(config, args, kind):
    system, antenna, params = _physics(config)
    n = antenna.n_ports
    ev = config["eval"]
    m_grid = args.m_grid or ev["m_grid"]
    with_model = not args.no_model

    def base_meta(m, policy, j=0, k=1, alpha=params.alpha, mu=params.mu):
        return {
            "m_observed": m,
            "policy": policy,
            "j_budget": j,
            "k_combine": k,
            "alpha": alpha,
            "mu": mu,
            "gamma_th_db": system.gamma_th_db,
        }

    rows = []
    if kind == "fading":
        fading_points = [(a, config["channel"]["mu"]) for a in ev["alpha_grid"]]
        fading_points += [
            (config["channel"]["alpha"], mu)
            for mu in ev["mu_grid"]
            if (config["channel"]["alpha"], mu) not in fading_points
        ]
        for alpha, mu in fading_points:
            sweep_params = FadingParams(alpha=float(alpha), mu=int(mu))
            jobs = []
            for m in m_grid:
                ports = PortSets.uniform(n, m)
                jobs.append((base_meta(m, "ideal", alpha=alpha, mu=mu), PolicyJob("ideal", Policy("ideal"), None)))
                jobs.append(
                    (base_meta(m, "reference", alpha=alpha, mu=mu), PolicyJob("reference", Policy("reference"), ports))
                )
            estimates = _estimate(config, jobs, system, antenna, sweep_params)
            rows += _curve_rows(config, [j[0] for j in jobs], estimates)
        return rows

    predictors = _load_predictors(config, m_grid, args.models_dir) if with_model else {}
    jobs = []
    k_values = ev["k_grid"] if kind == "mrc" else [1]
    j_values = ev["j_grid"] if kind == "observed" else [1]
    for m in m_grid:
        ports = PortSets.uniform(n, m)
        for k in k_values:
            jobs.append((base_meta(m, "ideal", k=k), PolicyJob("ideal", Policy("ideal", k=k), None)))
            if k <= m:
                jobs.append(
                    (base_meta(m, "reference", k=k), PolicyJob("reference", Policy("reference", k=k), ports))
                )
            if with_model and k <= m:
                for j in j_values:
                    policy = Policy("model_assisted", lookup_budget=j, k=k, predictor=predictors[m])
                    jobs.append((base_meta(m, "model", j=j, k=k), PolicyJob("model", policy, ports)))
    estimates = _estimate(config, jobs, system, antenna, params)
    return _curve_rows(config, [j[0] for j in jobs], estimates)


def cmd_curve(config, args, kind):
    rows = _curve_command(config, args, kind)
    out_dir = Path(config["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    path = args.output or out_dir / f"curve_{kind}.csv"
    _write_curve_csv(path, rows)
    _write_snapshot(path, f"curve-{kind}", config, args)
    print(f"wrote {path} ({len(rows)} rows)")
    return EXIT_OK


def cmd_sweep_classes(config, args):
    system, antenna, params = _physics(config)
    ev = config["eval"]
    rows = args.rows or ev["sweep_rows"]
    m_values = ev["sweep_m"]
    cache = {}

    def factory_for(m_obs):
        def factory(m_labels):
            if (m_obs, m_labels) not in cache:
                if (m_obs, None) not in cache:
                    cache[(m_obs, None)] = build_dataset(
                        system,
                        antenna,
                        params,
                        m_observed=m_obs,
                        m_labels=max(m_values),
                        count=ev["sweep_count"],
                        seed=config["seed"],
                    )
                cache[(m_obs, m_labels)] = relabel(cache[(m_obs, None)], m_labels)
            return cache[(m_obs, m_labels)]

        return factory

    hc = config["hpo"]
    table = class_count_sweep(
        rows,
        m_values,
        budget_per_cell=ev["sweep_budget"],
        seed=config["seed"],
        dataset_factory_for=factory_for,
        epochs=hc["epochs"],
        batch_size=hc["batch_size"],
        patience=hc["patience"],
    )
    out_dir = Path(config["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    path = args.output or out_dir / "sweep_classes.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m_observed"] + [f"M={m}" for m in m_values] + ["best_m"])
        for row in table.rows_as_dicts():
            writer.writerow(
                [row["m_observed"]]
                + [repr(float(row[f"M={m}"])) for m in m_values]
                + [row["best_m"]]
            )
    _write_snapshot(path, "sweep-classes", config, args)
    print(f"wrote {path}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="fluidport", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON config file (or a run snapshot)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--trials", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--out", help="output directory (env FLUIDPORT_OUTPUT_DIR)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-data")
    p.add_argument("--m", type=int, action="append", help="observed-port count (repeatable)")
    p.add_argument("--csv", action="store_true", help="also export a CSV mirror")

    p = sub.add_parser("train")
    p.add_argument("--dataset", required=True)
    p.add_argument("--m-labels", type=int, dest="m_labels")
    p.add_argument("--from-study", dest="from_study", help="adopt a study's best.json config")
    p.add_argument("--output")

    p = sub.add_parser("study")
    p.add_argument("--dataset", required=True)

    p = sub.add_parser("eval-op")
    p.add_argument("--policy", choices=["ideal", "reference", "model"], required=True)
    p.add_argument("--m", type=int)
    p.add_argument("--j", type=int, default=1)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--model", help="weights file for the model policy")
    p.add_argument("--output")

    for name in ("curve-observed", "curve-mrc", "curve-fading"):
        p = sub.add_parser(name)
        p.add_argument("--m-grid", type=int, nargs="*", dest="m_grid")
        p.add_argument("--models-dir", dest="models_dir")
        p.add_argument("--no-model", action="store_true", dest="no_model")
        p.add_argument("--output")

    p = sub.add_parser("sweep-classes")
    p.add_argument("--rows", type=int, nargs="*")
    p.add_argument("--output")
    return parser


def dispatch(command, config, args):
    if command == "generate-data":
        return cmd_generate_data(config, args)
    if command == "train":
        return cmd_train(config, args)
    if command == "study":
        return cmd_study(config, args)
    if command == "eval-op":
        return cmd_eval_op(config, args)
    if command == "curve-observed":
        return cmd_curve(config, args, "observed")
    if command == "curve-mrc":
        return cmd_curve(config, args, "mrc")
    if command == "curve-fading":
        return cmd_curve(config, args, "fading")
    if command == "sweep-classes":
        return cmd_sweep_classes(config, args)
    raise ConfigError(f"unknown command {command!r}")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.time()
    try:
        config = load_config(
            args.config, args.set, seed=args.seed, trials=args.trials, workers=args.workers, out=args.out
        )
        status = dispatch(args.command, config, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, OSError, DatasetFormatError) as exc:
        print(f"artifact error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"done in {time.time() - started:.1f}s")
    return status


if __name__ == "__main__":
    sys.exit(main())
