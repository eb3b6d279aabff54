"""
Command-line experiment runner.

Every subcommand resolves its parameters from (lowest to highest priority)
built-in defaults, a ``--preset``, a ``--config`` YAML file and explicit
flags, writes plot-ready CSV files atomically and records a manifest with
the resolved parameters and SHA-256 digests of every output.

Exit codes: 0 success, 2 invalid arguments, 3 non-convergence,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import experiments as ex
from .exceptions import NotConvergedError, NumericalError
from .io import build_manifest, csv_bytes, dump_yaml, file_digest, load_yaml, manifest_name, sha256, write_atomic
from .spin import check_spin

logger = logging.getLogger("qneuron")

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED, EXIT_NUMERICAL = 0, 2, 3, 4
PHASES = {"averaged": True, "coherent": False}


class UsageError(Exception):
    """Invalid parameter combination (exit code 2)."""


def _float_list(text) -> list[float]:
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _positive_int(text) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


# name -> (type, default, help); defaults of None mean "required unless supplied elsewhere"
DYNAMICS_KEYS = {
    "j": (float, 0.5, "probe spin"),
    "theta": (_float_list, [0.0, 90.0, 180.0], "comma-separated reservoir polar angles (degrees)"),
    "phi": (float, 0.0, "reservoir azimuth (degrees)"),
    "tau": (float, 3.0, "interaction time per collision"),
    "g": (float, 0.02, "coupling rate"),
    "collisions": (_positive_int, 3000, "number of collisions"),
}
ACTIVATION_KEYS = {
    "j": (_float_list, [0.5], "comma-separated probe spins"),
    "points": (_positive_int, 61, "theta grid points over [0, 180] degrees"),
    "phi": (float, 0.0, "reservoir azimuth (degrees)"),
    "tau": (float, 3.0, "interaction time per collision"),
    "g": (float, 0.02, "coupling rate"),
    "collisions": (_positive_int, 6000, "collisions per point (collision solver)"),
    "steady_tol": (float, 1e-6, "window spread accepted as steady (collision solver)"),
    "window": (_positive_int, 100, "steadiness window in collisions (collision solver)"),
}
COUPLING_KEYS = {
    "j": (_float_list, [0.5, 2.5], "comma-separated probe spins"),
    "g": (float, 0.02, "total coupling g = g1 + g2"),
    "points": (_positive_int, 21, "delta_g grid points over [-0.5, 0.5]"),
    "theta1": (float, 0.0, "first reservoir polar angle (degrees)"),
    "theta2": (float, 180.0, "second reservoir polar angle (degrees)"),
    "tau": (float, 3.0, "interaction time per collision"),
    "collisions": (_positive_int, 20000, "collisions per point (collision solver)"),
    "steady_tol": (float, 1e-6, "window spread accepted as steady (collision solver)"),
    "window": (_positive_int, 100, "steadiness window in collisions (collision solver)"),
}
TRAIN_KEYS = {
    "j": (_float_list, None, "comma-separated probe spins (one run each)"),
    "theta1": (float, None, "first reservoir polar angle (degrees)"),
    "theta2": (float, None, "second reservoir polar angle (degrees)"),
    "sigma_z1": (float, None, "first reservoir <sigma_z> (alternative to theta1)"),
    "sigma_z2": (float, None, "second reservoir <sigma_z> (alternative to theta2)"),
    "g1": (float, None, "initial first coupling"),
    "g2": (float, None, "initial second coupling"),
    "m_des": (float, None, "desired magnetization"),
    "units": (str, None, "units of m_des and m_act: normalized (<Sz>/J) or raw (<Sz>)"),
    "eta": (float, None, "learning rate"),
    "max_iters": (int, 10_000, "maximum number of updates"),
    "eps": (float, 1e-8, "stop once the cost drops below this"),
    "grad_mode": (str, "auto", "analytic, numeric or auto"),
    "tau": (float, 3.0, "interaction time (numeric gradient solver)"),
    "surface": (bool, False, "also write the cost surface over (g1, g2)"),
    "surface_points": (_positive_int, 41, "surface grid points per axis"),
    "surface_g1_max": (float, 0.05, "surface upper bound for g1"),
    "surface_g2_max": (float, 0.05, "surface upper bound for g2"),
}
COMMON_KEYS = {
    "propagator": (str, "exact", "collision propagator"),
    "solver": (str, "nullspace", "steady-state solver"),
    "reservoir_phase": (str, "averaged", "reservoir units keep (coherent) or lose (averaged) their phase"),
}
COMMANDS = {
    "dynamics": (DYNAMICS_KEYS, ex.DYNAMICS_PRESETS),
    "activation": (ACTIVATION_KEYS, ex.ACTIVATION_PRESETS),
    "couplings": (COUPLING_KEYS, ex.COUPLING_PRESETS),
    "train": (TRAIN_KEYS, ex.TRAIN_PRESETS),
}
CHOICES = {
    "propagator": ("exact", "second-order"),
    "solver": ex.SOLVERS,
    "reservoir_phase": tuple(PHASES),
    "units": ("normalized", "raw"),
    "grad_mode": ("analytic", "numeric", "auto"),
}


def _add_run_options(p: argparse.ArgumentParser, keys: dict) -> None:
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    p.add_argument("--preset", help="named parameter set")
    p.add_argument("--config", help="YAML file of parameters (a manifest also works)")
    p.add_argument("--jobs", type=_positive_int, default=None, help="worker processes (default: CPU count)")
    for name, (typ, _, text) in {**keys, **COMMON_KEYS}.items():
        flag = "--" + name.replace("_", "-")
        if typ is bool:
            p.add_argument(flag, action="store_true", default=None, help=text)
        else:
            p.add_argument(flag, type=typ, default=None, choices=CHOICES.get(name), help=text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qneuron", description="Dissipative spin-J quantum neuron experiments.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (keys, presets) in COMMANDS.items():
        p = sub.add_parser(name, help=f"run the {name} experiment (presets: {', '.join(presets)})")
        _add_run_options(p, keys)
    p = sub.add_parser("verify", help="recompute output digests recorded in manifests")
    p.add_argument("manifests", nargs="*", help="manifest files (default: all manifests in --out)")
    p.add_argument("--out", default=".", help="directory searched for manifests")
    p.add_argument("--rerun", action="store_true", help="also rerun each command and compare digests")
    return parser


def resolve_parameters(command: str, args: argparse.Namespace) -> dict:
    """Merge defaults, preset, config file and flags for ``command``."""
    keys, presets = COMMANDS[command]
    allowed = {**keys, **COMMON_KEYS}
    params = {name: default for name, (_, default, _) in allowed.items()}
    layers = []
    if args.preset is not None:
        if args.preset not in presets:
            raise UsageError(f"unknown preset {args.preset!r} for {command}; choose from {sorted(presets)}")
        layers.append(("preset", presets[args.preset]))
    if args.config is not None:
        try:
            data = load_yaml(args.config)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        if "parameters" in data and isinstance(data["parameters"], dict):
            data = data["parameters"]
        layers.append(("config", data))
    layers.append(("flags", {k: v for k, v in vars(args).items() if k in allowed and v is not None}))
    for source, layer in layers:
        for key, value in layer.items():
            key = key.replace("-", "_")
            if key in ("preset", "jobs", "out"):
                continue
            if key not in allowed:
                raise UsageError(f"unknown {source} key {key!r} for {command}")
            typ = allowed[key][0]
            if value is None:
                params[key] = allowed[key][1]
                continue
            try:
                params[key] = bool(value) if typ is bool else typ(value)
            except (TypeError, ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"bad value for {key}: {value!r}") from exc
            if key in CHOICES and params[key] not in CHOICES[key]:
                raise UsageError(f"{key} must be one of {CHOICES[key]}, got {params[key]!r}")
    params["preset"] = args.preset
    missing = [k for k, v in params.items() if v is None and k != "preset"]
    if command == "train":
        missing = _check_train(params, missing)
    if missing:
        raise UsageError(f"missing required parameters for {command}: {', '.join(sorted(missing))}")
    return params


def _check_train(params: dict, missing: list[str]) -> list[str]:
    for i in (1, 2):
        angle, sz = f"theta{i}", f"sigma_z{i}"
        if params[angle] is not None and params[sz] is not None:
            raise UsageError(f"give either {angle} or {sz}, not both")
        if params[angle] is not None or params[sz] is not None:
            missing = [k for k in missing if k not in (angle, sz)]
    return missing


def _reservoir_sz(params: dict, i: int) -> float:
    if params[f"sigma_z{i}"] is not None:
        return params[f"sigma_z{i}"]
    return float(np.cos(np.radians(params[f"theta{i}"])))


# each runner returns ({filename: bytes}, exit status)


def run_dynamics_cmd(params: dict, jobs: int):
    header, rows = ex.dynamics_rows(
        params["j"], params["theta"], params["phi"], params["tau"], params["g"], params["collisions"],
        params["propagator"], PHASES[params["reservoir_phase"]], jobs,
    )
    return {"dynamics.csv": csv_bytes(header, rows)}, EXIT_OK


def run_activation_cmd(params: dict, jobs: int):
    header, rows = ex.activation_rows(
        params["j"], params["points"], params["tau"], params["g"], params["phi"], params["solver"],
        PHASES[params["reservoir_phase"]], params["collisions"], params["steady_tol"], params["window"], jobs,
        propagator=params["propagator"],
    )
    return {"activation.csv": csv_bytes(header, rows)}, _status_code(r[-1] for r in rows)


def run_couplings_cmd(params: dict, jobs: int):
    header, rows = ex.coupling_rows(
        params["j"], params["g"], params["points"], params["theta1"], params["theta2"], params["tau"],
        params["solver"], PHASES[params["reservoir_phase"]], params["collisions"], params["steady_tol"],
        params["window"], jobs, propagator=params["propagator"],
    )
    return {"couplings.csv": csv_bytes(header, rows)}, _status_code(r[-1] for r in rows)


def _status_code(statuses) -> int:
    statuses = set(statuses)
    if "numerical-failure" in statuses:
        return EXIT_NUMERICAL
    if "not-converged" in statuses:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def run_train_cmd(params: dict, jobs: int):
    configs = []
    for j in params["j"]:
        j = check_spin(j)
        m_des = params["m_des"] / j if params["units"] == "raw" else params["m_des"]
        configs.append(
            ex.training_config(
                j, _reservoir_sz(params, 1), _reservoir_sz(params, 2), params["g1"], params["g2"], m_des,
                params["eta"], params["max_iters"], params["eps"], params["grad_mode"], params["tau"],
            )
        )
    for cfg in configs:
        if not cfg.reservoirs[0].g + cfg.reservoirs[1].g > 0:
            raise UsageError("initial couplings must not both be zero")
    header, rows = ex.train_rows(configs, jobs)
    scale = {c.j: (c.j if params["units"] == "raw" else 1.0) for c in configs}
    rows = [(j, it, g1, g2, c, m * scale[j]) for j, it, g1, g2, c, m in rows]
    outputs = {"train.csv": csv_bytes(header, rows)}
    if params["surface"]:
        srows = []
        for cfg in configs:
            sh, part = ex.surface_rows(cfg, params["surface_g1_max"], params["surface_g2_max"],
                                       params["surface_points"], jobs)
            srows.extend(part)
        outputs["surface.csv"] = csv_bytes(sh, srows)
    final = {}
    for j, _, _, _, c, _ in rows:
        final[j] = c
    unconverged = [j for j, c in final.items() if not c < params["eps"]]
    if unconverged:
        logger.warning("cost still above eps after max_iters for J = %s", unconverged)
        return outputs, EXIT_NOT_CONVERGED
    return outputs, EXIT_OK


RUNNERS = {
    "dynamics": run_dynamics_cmd,
    "activation": run_activation_cmd,
    "couplings": run_couplings_cmd,
    "train": run_train_cmd,
}


def execute(command: str, params: dict, jobs: int):
    """Run ``command`` with resolved parameters; returns (outputs, status)."""
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        warnings.showwarning = _log_warning
        return RUNNERS[command](params, jobs)


def _log_warning(message, category, filename, lineno, file=None, line=None):
    logger.warning("%s", message)


def cmd_run(command: str, args: argparse.Namespace) -> int:
    params = resolve_parameters(command, args)
    jobs = args.jobs or os.cpu_count() or 1
    start = time.perf_counter()
    outputs, status = execute(command, params, jobs)
    duration = time.perf_counter() - start
    out = Path(args.out)
    manifest = build_manifest(command, params, duration, outputs)
    files = {out / name: data for name, data in outputs.items()}
    files[out / manifest_name(command)] = dump_yaml(manifest)
    write_atomic(files)
    for name in outputs:
        print(out / name)
    return status


def cmd_verify(args: argparse.Namespace) -> int:
    paths = [Path(p) for p in args.manifests] or sorted(Path(args.out).glob("manifest_*.yaml"))
    if not paths:
        raise UsageError(f"no manifests found in {args.out}")
    ok = True
    for path in paths:
        try:
            manifest = load_yaml(path)
            entries = manifest["outputs"]
            command = manifest["command"]
        except (OSError, ValueError, KeyError) as exc:
            raise UsageError(f"{path}: not a manifest ({exc})") from exc
        for entry in entries:
            target = path.parent / entry["file"]
            actual = file_digest(target) if target.exists() else "missing"
            good = actual == entry["sha256"]
            ok &= good
            print(f"{'OK' if good else 'MISMATCH'} {target}")
        if args.rerun:
            if command not in RUNNERS:
                raise UsageError(f"{path}: unknown command {command!r}")
            outputs, _ = execute(command, manifest["parameters"], os.cpu_count() or 1)
            for entry in entries:
                data = outputs.get(entry["file"])
                good = data is not None and sha256(data) == entry["sha256"]
                ok &= good
                print(f"{'RERUN-OK' if good else 'RERUN-MISMATCH'} {entry['file']}")
    return EXIT_OK if ok else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "verify":
            return cmd_verify(args)
        return cmd_run(args.command, args)
    except UsageError as exc:
        print(f"qneuron: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NotConvergedError as exc:
        print(f"qneuron: not converged: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except NumericalError as exc:
        print(f"qneuron: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"qneuron: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
