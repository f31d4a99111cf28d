"""Command-line driver.

Every subcommand reads an optional JSON config (``--config``) whose keys are
the long flag names with dashes replaced by underscores; flags given on the
command line override config values one-to-one.

Exit codes: 0 success, 1 training diverged, 2 configuration error,
3 artifact mismatch, 4 I/O error.
"""
import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import evaluation, io, model, monitor, sweeps, tasks
from .distributions import family_from_dict
from .errors import ArtifactMismatch, InvalidArgument, TrainingDiverged
from .sketch import budget_split

log = logging.getLogger("scod")

EXIT_OK, EXIT_DIVERGED, EXIT_CONFIG, EXIT_MISMATCH, EXIT_IO = 0, 1, 2, 3, 4

DEFAULTS = {
    "gen-data": {"task": tasks.SINE, "seed": 0, "n_train": 200, "n_in_test": 100,
                 "n_out_test": 300, "noise": 0.1},
    "train": {"task": tasks.SINE, "seed": 0, "epochs": 2000, "lr": 0.05, "batch_size": 32,
              "hidden": "16,16", "activation": "relu"},
    "fit": {"T": 64, "k": 10, "eps2": 1.0, "seed": 0, "mask_fraction": 1.0},
    "score": {},
    "eval": {"n_boot": 1000, "conf": 0.95, "seed": 0},
    "sweep-rank": {"T_list": "34,64,124", "k_list": "1,2,4,8,16", "eps2": 1.0, "seed": 0,
                   "mask_fraction": 1.0},
    "sweep-prior": {"eps2_list": "1e-2,1,1e2", "T": 124, "k": 20, "seed": 0,
                    "mask_fraction": 1.0},
}


class ConfigError(Exception):
    pass


def _parser():
    p = argparse.ArgumentParser(prog="scod", description="Curvature-sketch OoD monitor")
    sub = p.add_subparsers(dest="command", required=True)

    def cmd(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="JSON file of defaults for this command")
        sp.add_argument("--out", help="output path")
        return sp

    sp = cmd("gen-data", "write train / in_test / out_test splits into the --out directory")
    sp.add_argument("--task", choices=[tasks.SINE, tasks.CLUSTERS])
    sp.add_argument("--seed", type=int)
    sp.add_argument("--n-train", type=int)
    sp.add_argument("--n-in-test", type=int)
    sp.add_argument("--n-out-test", type=int)
    sp.add_argument("--noise", type=float)

    sp = cmd("train", "fit network weights by SGD and write a model file")
    sp.add_argument("--data")
    sp.add_argument("--task", choices=[tasks.SINE, tasks.CLUSTERS])
    sp.add_argument("--hidden", help="comma separated hidden widths")
    sp.add_argument("--activation", choices=["relu", "tanh"])
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--batch-size", type=int)
    sp.add_argument("--seed", type=int)

    def sketch_flags(sp):
        sp.add_argument("--model")
        sp.add_argument("--data", help="training inputs to sketch")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--mask-fraction", type=float)

    sp = cmd("fit", "sketch the dataset Fisher and write a monitor file")
    sketch_flags(sp)
    sp.add_argument("--T", type=int)
    sp.add_argument("--k", type=int)
    sp.add_argument("--eps2", type=float)

    sp = cmd("score", "score inputs with a fitted monitor, one value per line")
    sp.add_argument("--model")
    sp.add_argument("--monitor")
    sp.add_argument("--inputs")

    sp = cmd("eval", "AUROC / AUPR with bootstrap intervals")
    sp.add_argument("--in-scores")
    sp.add_argument("--out-scores")
    sp.add_argument("--n-boot", type=int)
    sp.add_argument("--conf", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--roc-out")
    sp.add_argument("--pr-out")

    sp = cmd("sweep-rank", "AUROC over a (T, k) grid")
    sketch_flags(sp)
    sp.add_argument("--in-test")
    sp.add_argument("--out-test")
    sp.add_argument("--T-list")
    sp.add_argument("--k-list")
    sp.add_argument("--eps2", type=float)

    sp = cmd("sweep-prior", "AUROC over prior variances from one sketch")
    sketch_flags(sp)
    sp.add_argument("--in-test")
    sp.add_argument("--out-test")
    sp.add_argument("--eps2-list")
    sp.add_argument("--T", type=int)
    sp.add_argument("--k", type=int)
    return p


def _settings(args):
    cfg = dict(DEFAULTS[args.command])
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON ({exc})") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"{args.config}: top level must be an object")
        cfg.update(loaded)
    for key, value in vars(args).items():
        if key not in ("command", "config") and value is not None:
            cfg[key] = value
    return cfg


def _need(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise ConfigError("missing required setting(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))
    return [cfg[k] for k in keys]


def _num_list(text, kind):
    if isinstance(text, (list, tuple)):
        return [kind(v) for v in text]
    try:
        return [kind(float(t)) if kind is int else kind(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad numeric list {text!r}") from exc


def _check_rank(T, k):
    r, _ = budget_split(T)
    if T < 7:
        raise ConfigError(f"T={T} must be at least 7")
    if not 0 <= k <= 2 * r:
        raise ConfigError(f"k={k} must lie in [0, 2*floor((T-1)/3)={2 * r}]")


def _mask(config, fraction):
    if fraction is None or float(fraction) >= 1.0:
        return None
    return model.last_layers_mask(config, float(fraction))


def _write_text(path, text):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _table(header, rows):
    lines = ["\t".join(header)]
    for row in rows:
        lines.append("\t".join(repr(float(v)) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------ commands


def cmd_gen_data(cfg):
    (out,) = _need(cfg, "out")
    spec = tasks.TaskSpec(
        kind=cfg["task"], n_train=int(cfg["n_train"]), n_in_test=int(cfg["n_in_test"]),
        n_out_test=int(cfg["n_out_test"]), noise=float(cfg["noise"]), seed=int(cfg["seed"]),
    )
    splits = tasks.generate(spec)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for name, (X, Y) in splits.items():
        io.save_dataset(out / f"{name}.bin", X, Y)
    (out / "task.json").write_text(json.dumps(spec.to_dict(), sort_keys=True, indent=1) + "\n")
    log.info("wrote %s task splits to %s", spec.kind, out)


def cmd_train(cfg):
    data, out = _need(cfg, "data", "out")
    hidden = _num_list(cfg["hidden"], int)
    config, family = tasks.default_model(cfg["task"], hidden, cfg["activation"])
    if "architecture" in cfg:
        config = model.ModelConfig.from_dict(cfg["architecture"])
    if "family" in cfg:
        family = family_from_dict(cfg["family"])
    X, Y = io.load_dataset(data, config.n_in)
    if X.shape[0] == 0:
        raise ConfigError("training set is empty")
    rng = np.random.default_rng(int(cfg["seed"]))
    w = model.train_sgd(config, X, Y, family, int(cfg["epochs"]), float(cfg["lr"]), rng,
                        batch_size=int(cfg["batch_size"]))
    io.save_model(out, config, family, w)
    log.info("trained %s model with N=%d weights", config.layer_sizes, config.n_weights)


def cmd_fit(cfg):
    T, k = int(cfg["T"]), int(cfg["k"])
    _check_rank(T, k)
    model_path, data, out = _need(cfg, "model", "data", "out")
    config, family, w = io.load_model(model_path)
    mask = _mask(config, cfg.get("mask_fraction"))
    n_sel = config.n_weights if mask is None else len(mask)
    if T > n_sel:
        raise ConfigError(f"T={T} exceeds the sketched dimension N={n_sel}")
    X, _ = io.load_dataset(data, config.n_in)
    if X.shape[0] == 0:
        raise ConfigError("training set is empty")
    mon = monitor.build(config, w, family, X, T, k, float(cfg["eps2"]), int(cfg["seed"]), mask)
    io.save_monitor(out, mon)


def cmd_score(cfg):
    model_path, monitor_path, inputs, out = _need(cfg, "model", "monitor", "inputs", "out")
    config, family, w = io.load_model(model_path)
    mon = io.load_monitor(monitor_path, config, family, w)
    X, _ = io.load_dataset(inputs, config.n_in)
    io.save_scores(out, monitor.uncertainty_batch(mon, X))


def cmd_eval(cfg):
    in_path, out_path = _need(cfg, "in_scores", "out_scores")
    a, b = io.load_scores(in_path), io.load_scores(out_path)
    if a.size == 0 or b.size == 0:
        raise ConfigError("both score files must be non-empty")
    report = evaluation.evaluate(a, b, int(cfg["n_boot"]), float(cfg["conf"]), int(cfg["seed"]))
    _write_text(cfg.get("out"), report.to_text())
    if cfg.get("roc_out"):
        fpr, tpr = evaluation.roc_curve(a, b)
        _write_text(cfg["roc_out"], "".join(f"{float(x)!r}\t{float(y)!r}\n" for x, y in zip(fpr, tpr)))
    if cfg.get("pr_out"):
        rec, prec = evaluation.pr_curve(a, b)
        _write_text(cfg["pr_out"], "".join(f"{float(x)!r}\t{float(y)!r}\n" for x, y in zip(rec, prec)))


def _sweep_inputs(cfg):
    model_path, data, in_test, out_test = _need(cfg, "model", "data", "in_test", "out_test")
    config, family, w = io.load_model(model_path)
    X = io.load_dataset(data, config.n_in)[0]
    Xi = io.load_dataset(in_test, config.n_in)[0]
    Xo = io.load_dataset(out_test, config.n_in)[0]
    if min(X.shape[0], Xi.shape[0], Xo.shape[0]) == 0:
        raise ConfigError("sweep datasets must be non-empty")
    return config, family, w, X, Xi, Xo, _mask(config, cfg.get("mask_fraction"))


def cmd_sweep_rank(cfg):
    T_list = _num_list(cfg["T_list"], int)
    k_list = _num_list(cfg["k_list"], int)
    config, family, w, X, Xi, Xo, mask = _sweep_inputs(cfg)
    rows = sweeps.sweep_rank(config, w, family, X, Xi, Xo, T_list, k_list,
                             float(cfg["eps2"]), int(cfg["seed"]), mask)
    _write_text(cfg.get("out"), _table(("T", "k", "auroc"), rows))


def cmd_sweep_prior(cfg):
    eps2_list = _num_list(cfg["eps2_list"], float)
    if any(e <= 0 for e in eps2_list):
        raise ConfigError("every eps2 must be positive")
    T, k = int(cfg["T"]), int(cfg["k"])
    _check_rank(T, k)
    config, family, w, X, Xi, Xo, mask = _sweep_inputs(cfg)
    n_sel = config.n_weights if mask is None else len(mask)
    if T > n_sel:
        raise ConfigError(f"T={T} exceeds the sketched dimension N={n_sel}")
    rows = sweeps.sweep_prior(config, w, family, X, Xi, Xo, eps2_list, T, k, int(cfg["seed"]), mask)
    _write_text(cfg.get("out"), _table(("eps2", "auroc"), rows))


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "fit": cmd_fit,
    "score": cmd_score,
    "eval": cmd_eval,
    "sweep-rank": cmd_sweep_rank,
    "sweep-prior": cmd_sweep_prior,
}


def _setup_logging():
    level = os.environ.get("SCOD_LOG", "info").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None):
    _setup_logging()
    args = _parser().parse_args(argv)
    try:
        COMMANDS[args.command](_settings(args))
    except (ConfigError, InvalidArgument) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except ArtifactMismatch as exc:
        log.error("artifact mismatch: %s", exc)
        return EXIT_MISMATCH
    except TrainingDiverged as exc:
        log.error("training diverged: %s", exc)
        return EXIT_DIVERGED
    except OSError as exc:
        log.error("i/o error: %s", exc)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
