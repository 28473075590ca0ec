"""Command-line entry point.

    rfsolve <command> [--config FILE] [--flag value ...]

Commands: sample, invert, roundtrip, train, fig2, converge, nfe-ablation,
edit-study.  Settings come from built-in defaults, then the optional config
file (``key = value`` lines, ``#`` comments), then flags.  Outputs go to
``--out``, else ``$RFSOLVE_OUT``, else ``./rfsolve-out``.

Exit codes: 0 success, 1 numerical failure, 2 configuration error.
"""

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from rfsolve import harness, plotting
from rfsolve.attnfield import AttentionField
from rfsolve.edit import ShareConfig, mse
from rfsolve.errors import NumericalError
from rfsolve.field import ANALYTIC_FIELDS, Constant, GaussianPairOT, LinearState, LinearTime, QuadraticTime, Rotation
from rfsolve.solver import DENOISE, INVERT, SolverConfig, TimeGrid, run_trajectory
from rfsolve.tensorio import read_tensor, write_csv, write_tensor
from rfsolve.train import TOY_DISTRIBUTIONS, MlpField, TrainConfig, train

COMMANDS = ("sample", "invert", "roundtrip", "train", "fig2", "converge", "nfe-ablation", "edit-study")
FIELD_NAMES = tuple(ANALYTIC_FIELDS) + ("mlp", "attention")
NEEDS_FIELD = ("sample", "invert", "roundtrip", "fig2", "converge", "nfe-ablation")


class ConfigError(ValueError):
    pass


def _ints(text):
    return [int(x) for x in str(text).split(",") if x.strip()]


def _floats(text):
    return [float(x) for x in str(text).split(",") if x.strip()]


def _bool(text):
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# name -> (parser, default, help)
OPTIONS = {
    "field": (str, None, f"velocity field: {', '.join(FIELD_NAMES)}"),
    "a": (float, 1.0, "linear-state rate a in v = a z"),
    "c": (_floats, None, "constant velocity, comma-separated (default: ones of --dim)"),
    "omega": (float, 1.0, "rotation rate"),
    "dim": (int, None, "state dimension for dimension-free fields (default 1; 2 for mlp)"),
    "mu0": (_floats, [2.0, -1.0], "gaussian-ot data mean"),
    "sigma0": (_floats, [0.5, 0.3], "gaussian-ot data std"),
    "mu1": (_floats, [0.0], "gaussian-ot noise mean"),
    "sigma1": (_floats, [1.0], "gaussian-ot noise std"),
    "params": (str, None, "directory with trained mlp parameters (default: train in place)"),
    "steps": (_ints, [25], "number of timesteps N; a comma list for converge"),
    "order": (int, 2, "solver order (1, 2 or 3)"),
    "orders": (_ints, None, "orders to compare (fig2: 1,2; nfe-ablation: 1,2,3)"),
    "delta_t": (float, 0.01, "derivative probe step"),
    "direction": (str, DENOISE, "converge direction: denoise or invert"),
    "nfe_matched": (_bool, True, "fig2: run order 1 with twice the steps"),
    "seed": (int, 0, "random seed"),
    "samples": (int, 1, "number of start points"),
    "input": (str, None, "start state from an RFTENSOR file"),
    "condition": (int, None, "condition id for field evaluations"),
    "total_nfe": (int, 120, "nfe-ablation evaluation budget"),
    "n_share": (_ints, None, "edit-study sharing steps to sweep (default 0..N)"),
    "m_share": (int, None, "edit-study number of final blocks to share (default all)"),
    "share_probe": (_bool, True, "edit-study: share derivative-probe values too"),
    "source": (int, 0, "edit-study source condition"),
    "target": (int, 1, "edit-study target condition"),
    "tokens": (int, 4, "attention field tokens"),
    "channels": (int, 8, "attention field channels"),
    "blocks": (int, 2, "attention field blocks"),
    "dist": (str, "gaussian-mixture", f"training data: {', '.join(TOY_DISTRIBUTIONS)}"),
    "train_steps": (int, 2000, "optimisation steps"),
    "batch_size": (int, 256, "training batch size"),
    "lr": (float, 2e-3, "learning rate"),
    "optimizer": (str, "adam", "adam or sgd"),
    "hidden": (_ints, [64, 64, 64], "mlp hidden widths"),
    "out": (str, None, "output directory"),
    "plot": (_bool, True, "render PNG figures next to the CSV files"),
    "jobs": (int, 1, "parallel workers for sweep points"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    parser = _Parser(
        prog="rfsolve",
        description="Taylor-expansion rectified-flow solvers, inversion and feature-sharing studies.",
        epilog="commands:\n"
        "  sample        denoise seeded Gaussian noise (--field, --steps, --order)\n"
        "  invert        integrate data to noise (--field, --input or seeded start)\n"
        "  roundtrip     invert then denoise, report reconstruction MSE\n"
        "  train         fit an MLP velocity field (--dist, --train-steps, --lr)\n"
        "  fig2          per-timestep inversion/reconstruction MSE curves (--orders)\n"
        "  converge      global error and log-log slope (--steps 10,20,40,80,160)\n"
        "  nfe-ablation  reconstruction MSE per order at fixed --total-nfe\n"
        "  edit-study    feature-sharing sweep on the attention field (--n-share)\n",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        argument_default=argparse.SUPPRESS,
    )
    # choices are checked in resolve(): argparse would test them against the SUPPRESS default
    parser.add_argument("command", nargs="?", default=None, metavar="command")
    parser.add_argument("--config", help="key = value settings file")
    for name, (_, default, text) in OPTIONS.items():
        suffix = "" if default is None else f" [default: {default}]"
        parser.add_argument("--" + name.replace("_", "-"), dest=name, help=text + suffix)
    return parser


def read_config(path):
    settings = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        if key != "command" and key not in OPTIONS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        settings[key] = value.strip()
    return settings


def resolve(argv):
    args = vars(build_parser().parse_args(argv))
    raw = read_config(args.pop("config")) if "config" in args else {}
    raw.update({k: v for k, v in args.items() if v is not None})
    settings = {name: default for name, (_, default, _) in OPTIONS.items()}
    for key, value in raw.items():
        if key == "command":
            settings[key] = value
            continue
        try:
            settings[key] = OPTIONS[key][0](value)
        except ValueError as exc:
            raise ConfigError(f"bad value for --{key.replace('_', '-')}: {value!r} ({exc})") from exc
    command = settings.get("command")
    if command is not None and command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    if command is None:
        raise ConfigError("missing required command (one of: " + ", ".join(COMMANDS) + ")")
    if command in NEEDS_FIELD and settings["field"] is None:
        raise ConfigError("missing required flag --field")
    if settings["field"] is not None and settings["field"] not in FIELD_NAMES:
        raise ConfigError(f"unknown field {settings['field']!r}")
    if settings["out"] is None:
        settings["out"] = os.environ.get("RFSOLVE_OUT", "rfsolve-out")
    return settings


def make_field(s):
    name = s["field"]
    dim = s["dim"] or 1
    if name == "constant":
        return Constant(s["c"] if s["c"] is not None else np.ones(dim))
    if name == "linear-state":
        return LinearState(s["a"], dim)
    if name == "linear-time":
        return LinearTime(dim)
    if name == "quadratic-time":
        return QuadraticTime(dim)
    if name == "rotation":
        return Rotation(s["omega"])
    if name == "gaussian-ot":
        return GaussianPairOT(s["mu0"], s["sigma0"], s["mu1"], s["sigma1"])
    if name == "attention":
        return AttentionField.random(s["seed"], s["tokens"], s["channels"], s["blocks"])
    if s["params"]:
        return MlpField.load(s["params"])
    model, _ = _train(s)
    return model


def _train(s):
    if s["dist"] not in TOY_DISTRIBUTIONS:
        raise ConfigError(f"unknown distribution {s['dist']!r}")
    dist = TOY_DISTRIBUTIONS[s["dist"]]()
    config = TrainConfig(s["batch_size"], s["train_steps"], s["lr"], s["seed"], s["optimizer"])
    return train(MlpField.init(dist.dim, tuple(s["hidden"]), seed=s["seed"]), dist, config)


def start_state(s, field, data=True):
    """Start point(s): ``--input`` tensor, else seeded data (mlp) or Gaussian draws."""
    if s["input"]:
        return read_tensor(s["input"])
    rng = np.random.default_rng(s["seed"] + 1)
    n = s["samples"]
    if data and isinstance(field, MlpField):
        return TOY_DISTRIBUTIONS[s["dist"]]().sample(n, rng)
    shape = (field.dim,) if n == 1 else (n, field.dim)
    return rng.standard_normal(shape)


def _single_n(s):
    if len(s["steps"]) != 1:
        raise ConfigError("--steps must be a single integer for this command")
    return s["steps"][0]


def _stem(command, s, order, n):
    field = s["field"] or ("attention" if command == "edit-study" else "mlp")
    return f"{command}-{field}-{order}-{n}"


def _rows(states):
    states = np.atleast_2d(states)
    return [(f"z{i}", row) for i, row in enumerate(states)]


def _meta(s, **extra):
    keep = ("field", "order", "delta_t", "seed")
    meta = {k: s[k] for k in keep if s.get(k) is not None}
    meta.update(extra)
    return meta


def run(s):
    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)
    command = s["command"]
    order, delta_t = s["order"], s["delta_t"]
    written = []

    if command == "train":
        model, losses = _train(s)
        stem = f"train-mlp-{s['dist']}-{s['train_steps']}"
        model.save(out / f"{stem}-params")
        write_csv([("loss", losses)], out / f"{stem}.csv", metadata=_meta(s, dist=s["dist"], lr=s["lr"]))
        written.append(out / f"{stem}.csv")
        if s["plot"]:
            plotting.plot_losses(losses, out / f"{stem}.png")
        return written

    field = make_field(s) if command != "edit-study" else AttentionField.random(
        s["seed"], s["tokens"], s["channels"], s["blocks"])
    cond = s["condition"]

    if command in ("sample", "invert", "roundtrip"):
        n = _single_n(s)
        grid = TimeGrid.uniform(n)
        stem = _stem(command, s, order, n)
        if command == "sample":
            z = start_state(s, field, data=False)
            final, _, nfe = run_trajectory(field, z, grid, SolverConfig(order, delta_t, DENOISE), cond)
            meta = _meta(s, N=n, nfe=nfe)
        elif command == "invert":
            z = start_state(s, field)
            final, _, nfe = run_trajectory(field, z, grid, SolverConfig(order, delta_t, INVERT), cond)
            meta = _meta(s, N=n, nfe=nfe)
        else:
            z = start_state(s, field)
            inv, den = harness.roundtrip(field, z, grid, order, delta_t, cond)
            final = den.states[-1]
            err = mse(final, z)
            meta = _meta(s, N=n, mse=repr(err))
            print(f"mse={err!r}")
        write_tensor(final, out / f"{stem}.rft")
        rows = _rows(final) if command != "roundtrip" else [("mse", [err])] + _rows(final)
        write_csv(rows, out / f"{stem}.csv", metadata=meta)
        written.append(out / f"{stem}.csv")
        return written

    if command == "fig2":
        n = _single_n(s)
        orders = s["orders"] or [1, 2]
        z = start_state(s, field)
        curves = harness.fig2_study(field, z, n, orders, cond, delta_t, s["nfe_matched"])
        stem = _stem(command, s, "+".join(map(str, orders)), n)
        harness.write_curves_csv(curves, out / f"{stem}.csv", extra=_meta(s, N=n))
        if s["plot"]:
            plotting.plot_error_curves(curves, out / f"{stem}.png", title=s["field"])
        written.append(out / f"{stem}.csv")
        return written

    if command == "converge":
        if s["direction"] not in (DENOISE, INVERT):
            raise ConfigError(f"--direction must be {DENOISE} or {INVERT}")
        if not hasattr(field, "exact_solution"):
            raise ConfigError("converge needs an analytic field")
        z = start_state(s, field, data=False) if (s["input"] or s["samples"] > 1) else np.ones(field.dim)
        report = harness.convergence_study(field, z, s["direction"], order, s["steps"], delta_t, s["jobs"])
        stem = _stem(command, s, order, "+".join(map(str, s["steps"])))
        harness.write_convergence_csv(report, out / f"{stem}.csv", extra=_meta(s, direction=s["direction"]))
        if s["plot"]:
            plotting.plot_convergence(report, out / f"{stem}.png")
        print("slope=" + ("exact" if report.exact else repr(report.slope)))
        written.append(out / f"{stem}.csv")
        return written

    if command == "nfe-ablation":
        orders = s["orders"] or [1, 2, 3]
        z = start_state(s, field)
        rows = harness.nfe_ablation(field, z, s["total_nfe"], orders, cond, delta_t, s["jobs"])
        stem = _stem(command, s, "+".join(map(str, orders)), s["total_nfe"])
        harness.write_ablation_csv(rows, out / f"{stem}.csv", extra=_meta(s, total_nfe=s["total_nfe"]))
        if s["plot"]:
            plotting.plot_ablation(rows, out / f"{stem}.png", title=f"{s['field']}, NFE={s['total_nfe']}")
        written.append(out / f"{stem}.csv")
        return written

    # edit-study
    n = _single_n(s)
    grid = TimeGrid.uniform(n)
    z = start_state(s, field, data=False)
    sweep = s["n_share"] if s["n_share"] is not None else list(range(n + 1))
    rows = harness.edit_study(field, z, grid, s["source"], s["target"], sweep, s["m_share"], order, delta_t,
                              s["share_probe"])
    stem = _stem(command, s, order, n)
    harness.write_edit_csv(rows, out / f"{stem}.csv",
                           extra=_meta(s, field="attention", N=n, source=s["source"], target=s["target"],
                                       m_share=s["m_share"] or s["blocks"]))
    if s["plot"]:
        plotting.plot_edit_study(rows, out / f"{stem}.png")
    written.append(out / f"{stem}.csv")
    return written


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        settings = resolve(argv)
        # non-finite values are detected and reported by the solvers themselves
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            written = run(settings)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
