"""Command-line entry point: configuration, orchestration, and data export.

Subcommands: simulate, rescale, limit-sample, asymptotics, verify, figure.
Exit codes: 0 success, 1 a verification check failed, 2 configuration
error, 3 runtime error (divergence). Configuration lives in a JSON
document with nested sections; ``--set section.key=value`` flags override
config-file keys, and ``--output-dir`` overrides both the config value
and the ``SGDFLUCT_OUTPUT_DIR`` environment variable.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from sgdfluct import __version__
from sgdfluct import verify as verify_mod
from sgdfluct.asymptotics import compare_variances, sigma_limit
from sgdfluct.diffusion import LimitParams, sample_exact_paths
from sgdfluct.models import MODEL_KINDS, ModelSpec, ProblemModel, build_model
from sgdfluct.rescaling import rescale
from sgdfluct.rng import derive
from sgdfluct.sgd import DivergenceError, StepSchedule, Trajectory, run_sgd

OUTPUT_DIR_ENV = "SGDFLUCT_OUTPUT_DIR"

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


DEFAULT_CONFIG: dict = {
    "model": {
        "kind": "laplace_median",
        "dim": 2,
        "curvature": None,  # defaults to the identity where a matrix is needed
        "noise_cov": None,
        "laplace_scale": 1.0,
        "huber_threshold": 1.0,
    },
    "schedule": {"kind": "delta_over_n", "delta": 2.0, "c": 1.0, "alpha": 1.0},
    "run": {"n": 50000, "M": 1, "seed": 1, "theta0": [5.0, 5.0], "stride": 1},
    "rescale": {"grid": None},  # None -> the lattice k/n, k = 1..n
    "limit": {"grid": None, "horizon": 1.0, "grid_size": 1000, "n_paths": 1, "seed": 1},
    "figure": {"burn_in": 2000},
    "verify": {
        "checks": ["clt", "fdd", "consistency", "tightness"],
        "M": 2000,
        "seed": 1,
        "fdd_grid": [0.5, 1.0],
        "n_list": [1000, 10000, 100000],
        "c_multiplier": 10.0,
        "sup_horizon": 1.0,
        "sup_grid_size": 1000,
        "sup_paths": 20000,
        "coefficient_t_grid": [0.3, 0.7, 1.0],
        "coefficient_y_scale": 1.0,
        "exit_probability": {"t": 0.5, "y_scale": 1.0, "radius": 0.5, "M": 1000000},
        "tolerances": {},
    },
    "output_dir": ".",
}


def _parse_override(text: str) -> tuple[list[str], object]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like section.key=value")
    key, raw = text.split("=", 1)
    path = key.strip().split(".")
    if not all(path):
        raise ConfigError(f"override {text!r} has an empty key component")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return path, value


def _apply_override(config: dict, path: list[str], value: object) -> None:
    node = config
    for part in path[:-1]:
        nxt = node.get(part)
        if not isinstance(nxt, dict):
            nxt = {}
            node[part] = nxt
        node = nxt
    node[path[-1]] = value


def load_config(
    path: Optional[str], overrides: list[str], output_dir: Optional[str]
) -> dict:
    """Merge defaults, an optional JSON config file, --set overrides, and the output dir."""
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config document must be a JSON object")
        _merge(config, loaded)
    for text in overrides:
        key_path, value = _parse_override(text)
        _apply_override(config, key_path, value)
    # precedence: flag > config file > environment > built-in default
    if output_dir is not None:
        config["output_dir"] = output_dir
    elif path is None or "output_dir" not in _file_keys(path):
        env = os.environ.get(OUTPUT_DIR_ENV)
        if env and config["output_dir"] == DEFAULT_CONFIG["output_dir"]:
            config["output_dir"] = env
    return config


def _file_keys(path: str) -> set:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return set(doc) if isinstance(doc, dict) else set()
    except (OSError, json.JSONDecodeError):
        return set()


def _merge(base: dict, extra: dict) -> None:
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value


def _build_model_from_config(config: dict) -> ProblemModel:
    mc = config["model"]
    kind = mc.get("kind")
    if kind not in MODEL_KINDS:
        raise ConfigError(f"model.kind must be one of {MODEL_KINDS}, got {kind!r}")
    dim = int(mc.get("dim", 1))
    if dim < 1:
        raise ConfigError("model.dim must be >= 1")
    curvature = mc.get("curvature")
    noise_cov = mc.get("noise_cov")
    curvature = np.eye(dim) if curvature is None else np.asarray(curvature, float)
    noise_cov = np.eye(dim) if noise_cov is None else np.asarray(noise_cov, float)
    try:
        spec = ModelSpec(
            kind=kind,
            dim=dim,
            curvature=curvature,
            noise_cov=noise_cov,
            laplace_scale=float(mc.get("laplace_scale", 1.0)),
            huber_threshold=float(mc.get("huber_threshold", 1.0)),
        )
        return build_model(spec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _build_schedule(config: dict) -> StepSchedule:
    sc = config["schedule"]
    try:
        if sc.get("kind") == "delta_over_n":
            return StepSchedule.delta_over_n(float(sc["delta"]))
        if sc.get("kind") == "power":
            return StepSchedule.power(float(sc["c"]), float(sc["alpha"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid schedule: {exc}") from exc
    raise ConfigError(f"unknown schedule kind {sc.get('kind')!r}")


def _run_params(config: dict, model: ProblemModel) -> tuple[int, int, int, np.ndarray, int]:
    rc = config["run"]
    n = int(rc.get("n", 0))
    if n < 1:
        raise ConfigError("run.n must be >= 1")
    m = int(rc.get("M", 1))
    if m < 1:
        raise ConfigError("run.M must be >= 1")
    seed = int(rc.get("seed", 0))
    theta0 = rc.get("theta0")
    theta0 = (
        model.minimizer + np.ones(model.dim)
        if theta0 is None
        else np.asarray(theta0, dtype=float)
    )
    if theta0.shape != (model.dim,):
        raise ConfigError(f"run.theta0 must have {model.dim} entries")
    stride = int(rc.get("stride", 1))
    if stride < 1:
        raise ConfigError("run.stride must be >= 1")
    return n, m, seed, theta0, stride


def _output_dir(config: dict) -> Path:
    out = Path(config.get("output_dir", "."))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir: Path, config: dict, files: list[Path]) -> Path:
    """Record the config and a sha256 per output file; no timestamps, so reruns match.

    The output directory is omitted from the recorded config: the manifest's
    location already identifies it, and runs into different directories
    should otherwise produce byte-identical manifests.
    """
    manifest = {
        "version": __version__,
        "config": {k: v for k, v in config.items() if k != "output_dir"},
        "outputs": {p.name: _sha256(p) for p in sorted(files)},
    }
    path = out_dir / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def cmd_simulate(config: dict) -> int:
    model = _build_model_from_config(config)
    schedule = _build_schedule(config)
    n, m, seed, theta0, stride = _run_params(config, model)
    out = _output_dir(config)
    files = []
    for j in range(m):
        traj = run_sgd(model, schedule, theta0, n, derive(seed, j), stride=stride)
        path = out / f"trajectory_{j}.csv"
        traj.to_csv(path)
        files.append(path)
    write_manifest(out, config, files)
    return EXIT_OK


def _read_trajectory_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    try:
        data = np.genfromtxt(path, delimiter=",", names=True)
    except OSError as exc:
        raise ConfigError(f"cannot read trajectory {path}: {exc}") from exc
    names = data.dtype.names
    if names is None or names[0] != "k":
        raise ConfigError(f"{path} is not a trajectory CSV (header must start with k)")
    indices = data["k"].astype(np.int64)
    iterates = np.column_stack([data[name] for name in names[1:]])
    return indices, iterates


def cmd_rescale(config: dict, trajectory_file: str) -> int:
    model = _build_model_from_config(config)
    indices, iterates = _read_trajectory_csv(trajectory_file)
    if indices[0] != 0 or np.any(np.diff(indices) != 1):
        raise ConfigError("rescaling requires a stride-1 trajectory starting at k = 0")
    n = int(indices[-1])
    traj = Trajectory(
        model_name=model.name,
        schedule=_build_schedule(config),
        theta0=iterates[0],
        n_steps=n,
        seed=0,
        stride=1,
        indices=indices,
        iterates=iterates,
    )
    path = rescale(traj, n, model.minimizer)
    grid = config["rescale"].get("grid")
    grid = (
        np.arange(1, n + 1, dtype=float) / n
        if grid is None
        else np.asarray(grid, dtype=float)
    )
    out = _output_dir(config)
    target = out / (Path(trajectory_file).stem + "_rescaled.csv")
    path.to_csv(target, grid)
    write_manifest(out, config, [target])
    return EXIT_OK


def _limit_params(config: dict, model: ProblemModel) -> LimitParams:
    schedule = _build_schedule(config)
    if schedule.kind != "delta_over_n":
        raise ConfigError("the limit diffusion requires the delta_over_n schedule")
    try:
        return LimitParams.from_model(model, schedule.delta)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_limit_sample(config: dict) -> int:
    model = _build_model_from_config(config)
    params = _limit_params(config, model)
    lc = config["limit"]
    grid = lc.get("grid")
    if grid is None:
        size = int(lc.get("grid_size", 1000))
        horizon = float(lc.get("horizon", 1.0))
        if size < 1 or horizon <= 0.0:
            raise ConfigError("limit.grid_size must be >= 1 and limit.horizon positive")
        grid = np.linspace(horizon / size, horizon, size)
    else:
        grid = np.asarray(grid, dtype=float)
    n_paths = int(lc.get("n_paths", 1))
    if n_paths < 1:
        raise ConfigError("limit.n_paths must be >= 1")
    seed = int(lc.get("seed", 0))
    try:
        paths = sample_exact_paths(params, grid, n_paths, seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = _output_dir(config)
    d = params.dim
    header = "t," + ",".join(f"y_{i + 1}" for i in range(d))
    files = []
    for j in range(n_paths):
        path = out / f"limit_path_{j}.csv"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(header + "\n")
            for t, row in zip(grid, paths[j]):
                fh.write(f"{t:.17g}," + ",".join(f"{v:.17g}" for v in row) + "\n")
        files.append(path)
    write_manifest(out, config, files)
    return EXIT_OK


def cmd_asymptotics(config: dict) -> int:
    model = _build_model_from_config(config)
    params = _limit_params(config, model)
    report = compare_variances(params)
    out = _output_dir(config)
    path = out / "asymptotics.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest(out, config, [path])
    return EXIT_OK


def _run_checks(config: dict) -> list[verify_mod.VerificationReport]:
    model = _build_model_from_config(config)
    schedule = _build_schedule(config)
    vc = config["verify"]
    checks = vc.get("checks", [])
    seed = int(vc.get("seed", 0))
    n = int(config["run"].get("n", 0))
    m = int(vc.get("M", 2000))
    delta = float(config["schedule"].get("delta", 0.0))
    reports = []
    for idx, name in enumerate(checks):
        check_seed = derive(seed, idx)
        if name == "clt":
            reports.append(verify_mod.clt_check(model, delta, n, m, check_seed))
        elif name == "fdd":
            reports.append(
                verify_mod.fdd_check(model, delta, n, m, vc["fdd_grid"], check_seed)
            )
        elif name == "consistency":
            reports.append(
                verify_mod.consistency_check(model, schedule, vc["n_list"], m, check_seed)
            )
        elif name == "tightness":
            reports.append(
                verify_mod.tightness_check(
                    model, delta, vc["n_list"], m, float(vc["c_multiplier"]), check_seed
                )
            )
        elif name == "coefficient_convergence":
            scale = float(vc.get("coefficient_y_scale", 1.0))
            y_grid = [scale * np.ones(model.dim), -scale * np.ones(model.dim)]
            reports.append(
                verify_mod.coefficient_convergence_check(
                    model, delta, vc["n_list"], vc["coefficient_t_grid"], y_grid,
                    mc_samples=0 if model.has_exact_g else 10 ** 6,
                    base_seed=check_seed,
                )
            )
        elif name == "sup_bound":
            params = _limit_params(config, model)
            reports.append(
                verify_mod.sup_bound_check(
                    params,
                    float(vc.get("sup_horizon", 1.0)),
                    int(vc.get("sup_grid_size", 1000)),
                    int(vc.get("sup_paths", 20000)),
                    check_seed,
                )
            )
        elif name == "exit_probability":
            ec = vc["exit_probability"]
            t = float(ec["t"])
            y = float(ec["y_scale"]) * np.ones(model.dim)
            reports.append(
                verify_mod.exit_probability_check(
                    model, delta, n, t, y, float(ec["radius"]), int(ec["M"]), check_seed
                )
            )
        else:
            raise ConfigError(f"unknown check {name!r}")
    tolerances = vc.get("tolerances", {})
    for report in reports:
        for key, value in tolerances.get(report.name, {}).items():
            if key not in report.tolerance:
                raise ConfigError(f"check {report.name} has no tolerance {key!r}")
            report.tolerance[key] = float(value)
        report.passed = verify_mod.evaluate_pass(report.statistic, report.tolerance)
    return reports


def cmd_verify(config: dict) -> int:
    reports = _run_checks(config)
    out = _output_dir(config)
    files = []
    for report in reports:
        path = out / f"report_{report.name}.json"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
            fh.write("\n")
        files.append(path)
    write_manifest(out, config, files)
    for report in reports:
        status = "PASS" if report.passed else "FAIL"
        print(f"{status} {report.name} ({report.model})")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK_FAILED


def cmd_figure(config: dict) -> int:
    """Export the three CSVs backing the three-panel trajectory figure.

    Panel data: the full trajectory; the same trajectory with the first
    ``figure.burn_in`` iterations removed; and the rescaled path sampled
    on the lattice k/n.
    """
    model = _build_model_from_config(config)
    schedule = _build_schedule(config)
    n, _, seed, theta0, _ = _run_params(config, model)
    burn_in = int(config["figure"].get("burn_in", 2000))
    if not 0 <= burn_in < n:
        raise ConfigError("figure.burn_in must lie in [0, n)")
    traj = run_sgd(model, schedule, theta0, n, derive(seed, 0))
    out = _output_dir(config)
    full = out / "figure_trajectory.csv"
    traj.to_csv(full)

    keep = traj.indices >= burn_in
    zoom = out / "figure_zoom.csv"
    d = traj.iterates.shape[1]
    header = "k," + ",".join(f"theta_{i + 1}" for i in range(d))
    with open(zoom, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for k, row in zip(traj.indices[keep], traj.iterates[keep]):
            fh.write(str(int(k)) + "," + ",".join(f"{v:.17g}" for v in row) + "\n")

    path = rescale(traj, n, model.minimizer)
    grid = np.arange(1, n + 1, dtype=float) / n
    rescaled = out / "figure_rescaled.csv"
    path.to_csv(rescaled, grid)
    write_manifest(out, config, [full, zoom, rescaled])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgdfluct",
        description="Simulate SGD fluctuations and verify them against the limit theory.",
    )
    parser.add_argument("--config", help="JSON config file", default=None)
    parser.add_argument(
        "--set",
        action="append",
        dest="overrides",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override a config entry (JSON-parsed value); repeatable",
    )
    parser.add_argument(
        "--output-dir",
        default=None,
        help=f"output directory (default: config value, then ${OUTPUT_DIR_ENV}, then .)",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=1,
        help="worker cap; computation is vectorized, so this only bounds numpy threading",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", help="run SGD replications and export trajectory CSVs")
    p_rescale = sub.add_parser("rescale", help="rescale a trajectory CSV onto a time grid")
    p_rescale.add_argument("trajectory", help="trajectory CSV from the simulate command")
    sub.add_parser("limit-sample", help="sample the limit diffusion exactly")
    sub.add_parser("asymptotics", help="closed-form covariance comparison report")
    sub.add_parser("verify", help="run the Monte Carlo verification suite")
    sub.add_parser("figure", help="export the CSVs backing the three-panel figure")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        config = load_config(args.config, args.overrides, args.output_dir)
        if args.command == "simulate":
            return cmd_simulate(config)
        if args.command == "rescale":
            return cmd_rescale(config, args.trajectory)
        if args.command == "limit-sample":
            return cmd_limit_sample(config)
        if args.command == "asymptotics":
            return cmd_asymptotics(config)
        if args.command == "verify":
            return cmd_verify(config)
        if args.command == "figure":
            return cmd_figure(config)
        parser.error(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
