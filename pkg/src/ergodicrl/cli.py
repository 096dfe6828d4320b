"""Command-line entry point.

    python -m ergodicrl <command> [--preset NAME] [--config FILE] [--seed N]
                                  [--out DIR] [--override key=value ...]

Commands are ``simulate``, ``learn-transform``, ``train`` and ``diagnose``.
A run's configuration is the deep merge of the command defaults, the
preset, the config file and the overrides, in that order.  The resolved
configuration and the seed list are written into the output directory
before any work starts.

Exit codes: 0 success, 2 configuration error, 3 runtime failure,
4 a configured threshold check failed.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import math
import platform
import sys
import time
from dataclasses import fields
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .agent import TrainConfig
from .diagnostics import (
    coin_toss_sampler,
    ergodicity_witness,
    gbm_sampler,
    increment_variance_by_bin,
    kelly_oracle,
    proportionality_check,
    time_average_growth,
)
from .envs import (
    CoinTossConfig,
    GbmConfig,
    Trajectory,
    read_ensemble_csv,
    read_trajectory_csv,
    rollout_coin_toss,
    rollout_ensemble,
    simulate_gbm,
    stream,
    write_trajectory_csv,
)
from .experiments import CARTPOLE_TRAIN, KELLY_TRAIN, cartpole_run, coin_toss_pilot, kelly_run, log_recovery
from .risk_sensitive import RiskParams, strong_error_ladder
from .transform import learn_transform, log_transform

log = logging.getLogger("ergodicrl")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_THRESHOLD = 0, 2, 3, 4

COMMANDS = ("simulate", "learn-transform", "train", "diagnose")
DIAGNOSTICS = ("witness", "proportionality", "stabilization", "identity", "kelly_oracle", "sde")
CHECKS = ("log_recovery", "kelly_band", "raw_ruin", "transformed_wins", "ergodic_beats_standard")

_number = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_count = {"type": "integer", "minimum": 1}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ergodicrl experiment config",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "experiment": {"type": "string"},
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "env": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["coin_toss", "gbm", "cartpole", "additive"]},
                "initial_return": _pos,
                "gain_frac": _pos,
                "loss_frac": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "p_heads": {"type": "number", "minimum": 0, "maximum": 1},
                "drift": _number,
                "volatility": {"type": "number", "minimum": 0},
                "initial_value": _pos,
                "dt": _pos,
                "pole_scale": _pos,
            },
        },
        "fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "n_trajectories": _count,
        "horizon": _count,
        "modes": {"type": "array", "items": {"enum": ["none", "static", "per-episode"]}, "minItems": 1},
        "transform": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "source": {"enum": ["learned", "log"]},
                "input": {"type": "string"},
                "span": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "robust_iterations": {"type": "integer", "minimum": 0},
                "grid_size": {"type": "integer", "minimum": 2},
                "level_scale": {"enum": ["auto", "log", "linear"]},
                "pilot_horizon": _count,
                "pilot_fraction": {"type": "number", "minimum": 0, "maximum": 1},
                "pilot_seed": {"type": "integer", "minimum": 0},
            },
        },
        "train": {
            "type": "object",
            "additionalProperties": False,
            "properties": {f.name: {} for f in fields(TrainConfig) if f.name != "transform_mode"},
        },
        "diagnostics": {"type": "array", "items": {"enum": list(DIAGNOSTICS)}},
        "options": {
            "type": "object",
            "additionalProperties": False,
            "properties": {name: {"type": "object"} for name in DIAGNOSTICS},
        },
        "checks": {"type": "array", "items": {"enum": list(CHECKS)}},
        "thresholds": {"type": "object", "additionalProperties": _number},
    },
}

THRESHOLDS = {
    "r_squared": 0.95,
    "kelly_low": 0.15,
    "kelly_high": 0.35,
    "raw_fraction": 0.8,
    "min_pass_fraction": 0.8,
    "ensemble_rel_tol": 0.05,
    "growth_low": -0.0577,
    "growth_high": -0.0477,
    "ratio_spread": 1.5,
    "raw_variance_ratio": 50.0,
    "transformed_variance_ratio": 3.0,
    "identity_variance_ratio": 1.5,
    "sde_ratio_low": 1.2,
    "sde_ratio_high": 1.7,
}

DEFAULTS = {
    "seeds": [0],
    "env": {"kind": "coin_toss"},
    "fraction": 1.0,
    "n_trajectories": 1,
    "horizon": 1000,
    "modes": ["none"],
    "transform": {"source": "learned", "pilot_horizon": 10_000, "pilot_fraction": 1.0, "pilot_seed": 12345},
    "train": {},
    "diagnostics": [],
    "options": {},
    "checks": [],
    "thresholds": {},
}

FIVE_SEEDS = [0, 1, 2, 3, 4]

PRESETS = {
    "fig1": {"command": "simulate", "env": {"kind": "coin_toss"}, "fraction": 1.0, "n_trajectories": 10, "horizon": 1000},
    "fig2": {
        "command": "train",
        "env": {"kind": "coin_toss"},
        "modes": ["none", "static"],
        "transform": {"source": "log"},
        "checks": ["raw_ruin", "transformed_wins"],
    },
    "fig3": {
        "command": "train",
        "env": {"kind": "coin_toss"},
        "modes": ["static"],
        "transform": {"source": "learned"},
        "checks": ["transformed_wins"],
    },
    "kelly": {
        "command": "train",
        "env": {"kind": "coin_toss"},
        "modes": ["static", "none"],
        "transform": {"source": "learned"},
        "seeds": FIVE_SEEDS,
        "checks": ["kelly_band", "raw_ruin"],
    },
    "fig4a": {
        "command": "train",
        "env": {"kind": "cartpole", "pole_scale": 1.5},
        "modes": ["none", "per-episode"],
        "seeds": FIVE_SEEDS,
        "checks": ["ergodic_beats_standard"],
    },
    "sde-check": {"command": "diagnose", "diagnostics": ["sde"]},
    "witness": {"command": "diagnose", "diagnostics": ["witness"]},
    "proportionality": {"command": "diagnose", "diagnostics": ["proportionality"]},
    "stabilization": {"command": "diagnose", "diagnostics": ["stabilization"]},
    "identity": {"command": "diagnose", "env": {"kind": "additive"}, "diagnostics": ["identity"]},
    "coin-transform": {
        "command": "learn-transform",
        "env": {"kind": "coin_toss"},
        "horizon": 10_000,
        "fraction": 1.0,
        "checks": ["log_recovery"],
    },
    "gbm-transform": {
        "command": "learn-transform",
        "env": {"kind": "gbm"},
        "horizon": 100_000,
        "checks": ["log_recovery"],
    },
}


class ConfigError(Exception):
    pass


# -- configuration ---------------------------------------------------------------

def deep_merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_override(text: str) -> dict:
    """``a.b=3`` becomes ``{"a": {"b": 3}}``; values are JSON when they parse."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError(f"override {text!r} has an empty key")
    out = value
    for p in reversed(parts):
        out = {p: out}
    return out


def validate(config: dict) -> None:
    try:
        jsonschema.validate(config, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None


def resolve_config(command: str, preset: str | None = None, config_path: str | None = None,
                   seed: int | None = None, overrides=()) -> dict:
    cfg = deep_merge(DEFAULTS, {"command": command})
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; available: {', '.join(sorted(PRESETS))}")
        p = PRESETS[preset]
        if p["command"] != command:
            raise ConfigError(f"preset {preset!r} belongs to the {p['command']!r} command")
        cfg = deep_merge(cfg, p)
        cfg["experiment"] = preset
    if config_path is not None:
        try:
            loaded = json.loads(Path(config_path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {config_path} is not valid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        if loaded.get("command", command) != command:
            raise ConfigError(f"config file is for the {loaded['command']!r} command")
        cfg = deep_merge(cfg, loaded)
    for o in overrides:
        cfg = deep_merge(cfg, parse_override(o))
    if seed is not None:
        # shift the whole seed list so multi-seed presets stay multi-seed
        n = len(cfg["seeds"])
        cfg["seeds"] = [int(seed) + i for i in range(n)]
    cfg.setdefault("experiment", command)
    validate(cfg)
    try:
        TrainConfig(**{**_train_defaults(cfg), "transform_mode": "none"})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config error at train: {exc}") from None
    return cfg


def _train_defaults(cfg: dict) -> dict:
    base = CARTPOLE_TRAIN if cfg["env"]["kind"] == "cartpole" else KELLY_TRAIN
    return {**base, **cfg["train"]}


def _thresholds(cfg: dict) -> dict:
    return {**THRESHOLDS, **cfg["thresholds"]}


def _coin_cfg(cfg: dict, horizon: int | None = None) -> CoinTossConfig:
    env = cfg["env"]
    kw = {k: env[k] for k in ("initial_return", "gain_frac", "loss_frac", "p_heads") if k in env}
    try:
        return CoinTossConfig(horizon=int(horizon or cfg["horizon"]), **kw)
    except ValueError as exc:
        raise ConfigError(f"config error at env: {exc}") from None


def _gbm_cfg(cfg: dict, horizon: int | None = None) -> GbmConfig:
    env = cfg["env"]
    kw = {k: env[k] for k in ("drift", "volatility", "initial_value", "dt") if k in env}
    try:
        return GbmConfig(horizon=int(horizon or cfg["horizon"]), **kw)
    except ValueError as exc:
        raise ConfigError(f"config error at env: {exc}") from None


# -- output ---------------------------------------------------------------------

def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(data, indent=2, default=_jsonable, allow_nan=True))
    return path


def write_provenance(out: Path, cfg: dict, argv) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "config.json", cfg)
    write_json(
        out / "provenance.json",
        {
            "seeds": cfg["seeds"],
            "version": __version__,
            "argv": list(argv),
            "python": platform.python_version(),
            "numpy": np.__version__,
            "started": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        },
    )


# -- commands -------------------------------------------------------------------

def cmd_simulate(cfg: dict, out: Path) -> dict:
    kind = cfg["env"]["kind"]
    n = cfg["n_trajectories"]
    tdir = out / "trajectories"
    tdir.mkdir(exist_ok=True)
    rows = []
    for s in cfg["seeds"]:
        if kind == "coin_toss":
            trajs = rollout_ensemble(_coin_cfg(cfg), cfg["fraction"], n, s)
        elif kind == "gbm":
            gcfg = _gbm_cfg(cfg)
            trajs = [simulate_gbm(gcfg, s, index=i) for i in range(n)]
        else:
            raise ConfigError(f"simulate supports coin_toss and gbm, not {kind!r}")
        for i, t in enumerate(trajs):
            write_trajectory_csv(t, tdir / f"seed{s}_traj{i:03d}.csv")
            rows.append({"seed": s, "index": i, "final_return": t.final_return,
                         "time_average_growth": time_average_growth(t)})
    finals = np.array([r["final_return"] for r in rows])
    report = {
        "n_trajectories": len(rows),
        "final_mean": float(finals.mean()),
        "final_median": float(np.median(finals)),
        "trajectories": rows,
    }
    write_json(out / "summary.json", report)
    return {"checks": {}}


def _pilot(cfg: dict) -> Trajectory | list:
    tcfg = cfg["transform"]
    if "input" in tcfg:
        try:
            with open(tcfg["input"]) as fh:
                ensemble = fh.readline().startswith("traj_id")
            return read_ensemble_csv(tcfg["input"]) if ensemble else read_trajectory_csv(tcfg["input"])
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read transform input: {exc}") from None
    kind = cfg["env"]["kind"]
    seed = cfg["seeds"][0]
    if kind == "coin_toss":
        return rollout_coin_toss(_coin_cfg(cfg), cfg["fraction"], seed)
    if kind == "gbm":
        return simulate_gbm(_gbm_cfg(cfg), seed)
    if kind == "additive":
        z = stream(seed, 0).standard_normal(cfg["horizon"])
        return Trajectory.from_returns(100.0 + np.concatenate(([0.0], np.cumsum(z))))
    raise ConfigError(f"learn-transform supports coin_toss, gbm and additive, not {kind!r}")


def _transform_kwargs(cfg: dict) -> dict:
    t = cfg["transform"]
    return {k: t[k] for k in ("span", "robust_iterations", "grid_size", "level_scale") if k in t}


def cmd_learn_transform(cfg: dict, out: Path) -> dict:
    data = _pilot(cfg)
    h = learn_transform(data, **_transform_kwargs(cfg))
    h.save(out / "transform.json")
    fit = log_recovery(h)
    thr = _thresholds(cfg)
    checks = {}
    if "log_recovery" in cfg["checks"]:
        checks["log_recovery"] = {"r_squared": fit["r_squared"], "threshold": thr["r_squared"],
                                  "passed": bool(fit["r_squared"] >= thr["r_squared"])}
    write_json(out / "report.json", {"log_recovery": fit, "meta": h.meta, "checks": checks})
    return {"checks": checks}


def _coin_transform(cfg: dict, out: Path):
    t = cfg["transform"]
    if t["source"] == "log":
        return log_transform
    pilot = coin_toss_pilot(seed=t["pilot_seed"], horizon=t["pilot_horizon"], fraction=t["pilot_fraction"],
                            cfg=_coin_cfg(cfg))
    h = learn_transform(pilot, **_transform_kwargs(cfg))
    h.save(out / "transform.json")
    return h


def _fraction(flags) -> float:
    return sum(flags) / len(flags) if flags else math.nan


def cmd_train(cfg: dict, out: Path) -> dict:
    kind = cfg["env"]["kind"]
    overrides = dict(cfg["train"])
    runs = []
    if kind == "coin_toss":
        env_cfg = _coin_cfg(cfg)
        h = _coin_transform(cfg, out) if any(m != "none" for m in cfg["modes"]) else None
    elif kind == "cartpole":
        if "static" in cfg["modes"]:
            raise ConfigError("cart-pole training supports modes none and per-episode")
    else:
        raise ConfigError(f"train supports coin_toss and cartpole, not {kind!r}")
    for s in cfg["seeds"]:
        for mode in cfg["modes"]:
            t0 = time.perf_counter()
            if kind == "coin_toss":
                r = kelly_run(s, mode, transform=h if mode == "static" else None, env_cfg=env_cfg, overrides=overrides)
            else:
                r = cartpole_run(s, mode, pole_scale=cfg["env"].get("pole_scale", 1.0), overrides=overrides)
            res, ev = r["result"], r["evaluation"]
            tag = f"{mode}_seed{s}"
            res.write_curve_csv(out / f"curve_{tag}.csv")
            res.params.save(out / f"policy_{tag}.json", res.config)
            write_json(out / f"evaluation_{tag}.json", ev)
            row = {"seed": s, "mode": mode, "test_mean": ev["mean"], "test_median": ev["median"],
                   "mean_action": ev.get("mean_action"), "mean_length": ev["mean_length"],
                   "transform_failures": res.transform_failures,
                   "seconds": round(time.perf_counter() - t0, 2)}
            log.info("%s", row)
            runs.append(row)
    checks = _train_checks(cfg, runs)
    write_json(out / "summary.json", {"runs": runs, "checks": checks})
    return {"checks": checks}


def _train_checks(cfg: dict, runs: list) -> dict:
    thr = _thresholds(cfg)
    initial = _coin_cfg(cfg).initial_return
    by = {(r["seed"], r["mode"]): r for r in runs}
    seeds = cfg["seeds"]
    need = thr["min_pass_fraction"]
    checks = {}

    def record(name, flags, detail):
        frac = _fraction(flags)
        checks[name] = {"per_seed": flags, "pass_fraction": frac, "required": need,
                        "passed": bool(flags) and frac >= need, **detail}

    transformed = [m for m in cfg["modes"] if m != "none"]
    if "kelly_band" in cfg["checks"]:
        flags = [thr["kelly_low"] <= by[(s, m)]["mean_action"] <= thr["kelly_high"] for s in seeds for m in transformed]
        record("kelly_band", flags, {"band": [thr["kelly_low"], thr["kelly_high"]], "oracle": kelly_oracle(_coin_cfg(cfg))[0]})
    if "raw_ruin" in cfg["checks"]:
        flags = [by[(s, "none")]["mean_action"] >= thr["raw_fraction"] or by[(s, "none")]["test_median"] < initial
                 for s in seeds if (s, "none") in by]
        record("raw_ruin", flags, {"raw_fraction": thr["raw_fraction"], "initial_return": initial})
    if "transformed_wins" in cfg["checks"]:
        flags = [by[(s, m)]["test_median"] > initial for s in seeds for m in transformed]
        record("transformed_wins", flags, {"initial_return": initial})
    if "ergodic_beats_standard" in cfg["checks"]:
        flags = [by[(s, "per-episode")]["test_mean"] > by[(s, "none")]["test_mean"]
                 for s in seeds if (s, "per-episode") in by and (s, "none") in by]
        record("ergodic_beats_standard", flags, {})
    return checks


# -- diagnostics ------------------------------------------------------------------

def _diag_witness(cfg, thr, opts):
    w = ergodicity_witness(_coin_cfg(cfg), seed=cfg["seeds"][0], **opts)
    ok_mean = abs(w["ensemble_mean"] / w["ensemble_mean_expected"] - 1) <= thr["ensemble_rel_tol"]
    ok_growth = thr["growth_low"] <= w["time_average_growth"] <= thr["growth_high"]
    return {**w, "passed": bool(ok_mean and ok_growth)}


def _diag_proportionality(cfg, thr, opts):
    levels = opts.pop("levels", [10.0, 20.0, 40.0, 70.0, 100.0])
    n = int(opts.pop("n_samples", 1_000_000))
    if opts:
        raise ConfigError(f"unknown proportionality options {sorted(opts)}")
    g = proportionality_check(gbm_sampler(), levels, n, seed=cfg["seeds"][0])
    c = proportionality_check(coin_toss_sampler(_coin_cfg(cfg)), levels, n, seed=cfg["seeds"][0] + 1)
    passed = g["ratio_spread"] <= thr["ratio_spread"] and c["ratio_spread"] <= thr["ratio_spread"]
    return {"gbm": g, "coin_toss": c, "threshold": thr["ratio_spread"], "passed": bool(passed)}


def _diag_stabilization(cfg, thr, opts):
    horizon = int(opts.pop("horizon", 10_000))
    n_bins = int(opts.pop("n_bins", 10))
    if opts:
        raise ConfigError(f"unknown stabilization options {sorted(opts)}")
    path = rollout_coin_toss(_coin_cfg(cfg, horizon), 1.0, cfg["seeds"][0])
    h = learn_transform(path, **_transform_kwargs(cfg))
    raw = increment_variance_by_bin(path, None, n_bins)
    tr = increment_variance_by_bin(path, h, n_bins)
    passed = raw["ratio"] >= thr["raw_variance_ratio"] and tr["ratio"] <= thr["transformed_variance_ratio"]
    return {"raw": raw, "transformed": tr, "passed": bool(passed)}


def _diag_identity(cfg, thr, opts):
    horizon = int(opts.pop("horizon", 10_000))
    if opts:
        raise ConfigError(f"unknown identity options {sorted(opts)}")
    z = stream(cfg["seeds"][0], 0).standard_normal(horizon)
    walk = Trajectory.from_returns(100.0 + np.concatenate(([0.0], np.cumsum(z))))
    raw = increment_variance_by_bin(walk, None)
    return {"raw": raw, "threshold": thr["identity_variance_ratio"],
            "passed": bool(raw["ratio"] <= thr["identity_variance_ratio"])}


def _diag_kelly(cfg, thr, opts):
    F, g = kelly_oracle(_coin_cfg(cfg), **opts)
    return {"fraction": F, "growth": g, "passed": True}


def _diag_sde(cfg, thr, opts):
    beta = opts.pop("beta", -1.0)
    mu = opts.pop("mu", 0.05)
    sigma = opts.pop("sigma", 0.2)
    lad = strong_error_ladder(RiskParams(beta=beta, mu=mu, sigma=sigma), seed=cfg["seeds"][0], **opts)
    e = lad["mean_error"]
    monotone = all(a > b for a, b in zip(e, e[1:]))
    in_band = all(thr["sde_ratio_low"] <= r <= thr["sde_ratio_high"] for r in lad["ratios"])
    factors = [a / b for a, b in zip(lad["dts"], lad["dts"][1:])]
    orders = [math.log(r) / math.log(f) for r, f in zip(lad["ratios"], factors)]
    return {**lad, "observed_order": orders, "monotone": monotone,
            "ratio_band": [thr["sde_ratio_low"], thr["sde_ratio_high"]], "ratios_in_band": in_band,
            "passed": bool(monotone and in_band)}


_DIAGNOSTICS = {
    "witness": _diag_witness,
    "proportionality": _diag_proportionality,
    "stabilization": _diag_stabilization,
    "identity": _diag_identity,
    "kelly_oracle": _diag_kelly,
    "sde": _diag_sde,
}


def cmd_diagnose(cfg: dict, out: Path) -> dict:
    if not cfg["diagnostics"]:
        raise ConfigError("diagnose needs at least one entry in 'diagnostics'")
    thr = _thresholds(cfg)
    checks = {}
    for name in cfg["diagnostics"]:
        opts = dict(cfg["options"].get(name, {}))
        try:
            rep = _DIAGNOSTICS[name](cfg, thr, opts)
        except TypeError as exc:
            raise ConfigError(f"bad options for {name}: {exc}") from None
        write_json(out / f"diagnose_{name}.json", {"inputs": {"seeds": cfg["seeds"], "options": cfg["options"].get(name, {})},
                                                   "thresholds": thr, **rep})
        checks[name] = {"passed": rep["passed"]}
    write_json(out / "summary.json", {"checks": checks})
    return {"checks": checks}


HANDLERS = {
    "simulate": cmd_simulate,
    "learn-transform": cmd_learn_transform,
    "train": cmd_train,
    "diagnose": cmd_diagnose,
}


# -- entry point ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ergodicrl", description="Ergodicity transforms for reinforcement learning.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--preset", help=f"named experiment: {', '.join(sorted(PRESETS))}")
        p.add_argument("--seed", type=int, help="first seed; a multi-seed list is shifted to start here")
        p.add_argument("--out", help="output directory (default runs/<experiment>)")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted key, JSON value; repeatable")
        p.add_argument("-v", "--verbose", action="store_true")
    sub.add_parser("schema", help="print the config JSON schema")
    sub.add_parser("presets", help="print the named presets")
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if args.command == "schema":
        print(json.dumps(SCHEMA, indent=2))
        return EXIT_OK
    if args.command == "presets":
        print(json.dumps(PRESETS, indent=2))
        return EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args.command, args.preset, args.config, args.seed, args.override)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or Path("runs") / cfg["experiment"])
    try:
        write_provenance(out, cfg, argv)
        result = HANDLERS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported and mapped to an exit code
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    failed = [k for k, v in result["checks"].items() if not v["passed"]]
    for k, v in result["checks"].items():
        print(f"{'PASS' if v['passed'] else 'FAIL'} {k}")
    print(f"outputs in {out}")
    return EXIT_THRESHOLD if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
