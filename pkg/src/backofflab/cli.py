"""Config ingestion, command dispatch, and CSV/JSON emission.

Commands
--------
analyze    closed-form metrics for each scenario
simulate   slot-accurate simulation for each scenario
compare    simulation vs model with signed relative errors
sweep      one metric across an axis, one column per policy variant

Config documents are JSON with the top-level keys ``command``, ``profile``,
``phy``, ``mode``, ``policy``, ``scenario``, ``model``, ``sweep`` and
``output``. Unknown keys anywhere are a hard error. See README for the full
schema and ``configs/`` for ready-made recipes.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field, replace
from .model import evaluate
from .policies import PolicyParams
from .simulator import (AllNodes, EventBurst, ScenarioConfig, SimMetrics,
                        compare, run)
from .timing import PROFILES, AccessMode, PhyParams, slot_durations


class ConfigError(ValueError):
    pass


COMMANDS = ("analyze", "simulate", "compare", "sweep")
SWEEP_AXES = ("n_nodes", "t_cw", "halving_prob_f")

#: sweep metric -> (unit suffix, sim extractor, model extractor)
METRICS = {
    "nst": ("bps",
            lambda s: s.throughput_bps,
            lambda sol, m: m.throughput_bps),
    "snorm": ("",
              lambda s: s.throughput_norm,
              lambda sol, m: m.throughput_norm),
    "cad": ("us",
            lambda s: s.mean_access_delay_us,
            lambda sol, m: m.e_delay_us),
    "pdrop": ("",
              lambda s: (s.dropped_packets
                         / (s.delivered_packets + s.dropped_packets)
                         if s.delivered_packets + s.dropped_packets else math.nan),
              lambda sol, m: m.p_drop),
    "p": ("", lambda s: s.measured_p, lambda sol, m: sol.p),
    "tau": ("", lambda s: s.measured_tau, lambda sol, m: sol.tau),
}


@dataclass(frozen=True)
class ModelOptions:
    idle_slot: str = "slot"  # or "propagation"
    normalization: str = "stalling"  # or "per-slot"
    window_sum_delay: bool = False


@dataclass(frozen=True)
class LabeledScenario:
    label: str
    x_value: float | None
    config: ScenarioConfig


@dataclass(frozen=True)
class RunManifest:
    command: str
    scenarios: tuple[LabeledScenario, ...]
    profile: str = "table1"
    output_path: str | None = None
    output_format: str = "csv"
    model_options: ModelOptions = field(default_factory=ModelOptions)
    x_axis: str | None = None
    metric: str | None = None
    engine: str = "sim"
    seeds: tuple[int, ...] = ()
    source: dict | None = None  # normalized config document, for round-trips


def _require_keys(section: dict, allowed: set[str], where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}; "
                          f"allowed: {sorted(allowed)}")


_PHY_FIELDS = {f.name for f in dataclasses.fields(PhyParams)}
_POLICY_FIELDS = {f.name for f in dataclasses.fields(PolicyParams)}


def _build_phy(doc: dict, profile: str) -> PhyParams:
    section = doc.get("phy", {})
    if not isinstance(section, dict):
        raise ConfigError("phy: expected an object")
    _require_keys(section, _PHY_FIELDS, "phy")
    try:
        return PROFILES[profile](**section)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"phy: {e}") from e


def _build_policy_params(overrides: dict, where: str) -> PolicyParams:
    _require_keys(overrides, _POLICY_FIELDS, where)
    try:
        return PolicyParams(**overrides)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


def _parse_policy_spec(spec, where: str, require_name: bool = True
                       ) -> tuple[str, str, dict]:
    """Returns (name, label, param overrides)."""
    if isinstance(spec, str):
        name, label, overrides = spec, spec, {}
    elif isinstance(spec, dict):
        if "name" not in spec and require_name:
            raise ConfigError(f"{where}: policy object needs a 'name'")
        name = spec.get("name", "beb")
        label = spec.get("label", name)
        overrides = {k: v for k, v in spec.items() if k not in ("name", "label")}
    else:
        raise ConfigError(f"{where}: expected a string or object")
    if name not in ("beb", "arb", "arb-halving"):
        raise ConfigError(f"{where}: unknown policy name {name!r}")
    return name, str(label), overrides


def _parse_active(value, where: str):
    if value in (None, "all"):
        return AllNodes()
    if isinstance(value, dict):
        _require_keys(value, {"count", "activation_slot"}, where)
        if "count" not in value:
            raise ConfigError(f"{where}: event burst needs 'count'")
        return EventBurst(count=value["count"],
                          activation_slot=value.get("activation_slot", 0))
    raise ConfigError(f"{where}: expected \"all\" or an object with count")


def parse_config(text: str, command: str | None = None) -> RunManifest:
    """Parse a JSON config document into a fully-defaulted manifest.

    ``command`` (from the CLI subcommand) must agree with the document's
    ``command`` key when both are present.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError("top level must be an object")
    _require_keys(doc, {"command", "profile", "phy", "mode", "policy",
                        "scenario", "model", "sweep", "output"}, "top level")

    doc_command = doc.get("command")
    if doc_command is not None and doc_command not in COMMANDS:
        raise ConfigError(f"command: expected one of {COMMANDS}, got {doc_command!r}")
    if command and doc_command and command != doc_command:
        raise ConfigError(f"command mismatch: CLI says {command!r}, "
                          f"config says {doc_command!r}")
    final_command = command or doc_command
    if final_command is None:
        raise ConfigError("no command given (CLI subcommand or 'command' key)")

    profile = doc.get("profile", "table1")
    if profile not in PROFILES:
        raise ConfigError(f"profile: expected one of {sorted(PROFILES)}, got {profile!r}")
    phy = _build_phy(doc, profile)

    mode_name = doc.get("mode", "basic")
    try:
        mode = AccessMode(mode_name)
    except ValueError:
        raise ConfigError(f"mode: expected 'basic' or 'rtscts', got {mode_name!r}")

    model_section = doc.get("model", {})
    if not isinstance(model_section, dict):
        raise ConfigError("model: expected an object")
    _require_keys(model_section, {"idle_slot", "normalization", "window_sum_delay"},
                  "model")
    opts = ModelOptions(
        idle_slot=model_section.get("idle_slot", "slot"),
        normalization=model_section.get("normalization", "stalling"),
        window_sum_delay=bool(model_section.get("window_sum_delay", False)),
    )
    if opts.idle_slot not in ("slot", "propagation"):
        raise ConfigError("model.idle_slot: expected 'slot' or 'propagation'")
    if opts.normalization not in ("stalling", "per-slot"):
        raise ConfigError("model.normalization: expected 'stalling' or 'per-slot'")

    scenario_section = doc.get("scenario", {})
    if not isinstance(scenario_section, dict):
        raise ConfigError("scenario: expected an object")
    _require_keys(scenario_section,
                  {"n_nodes", "seed", "horizon_slots", "horizon_us",
                   "warmup_slots", "active"}, "scenario")
    if "n_nodes" not in scenario_section:
        raise ConfigError("scenario.n_nodes is required")
    active = _parse_active(scenario_section.get("active"), "scenario.active")

    def scenario_for(policy_name: str, params: PolicyParams,
                     n_nodes: int, seed: int) -> ScenarioConfig:
        try:
            return ScenarioConfig(
                n_nodes=n_nodes,
                policy_name=policy_name,
                policy=params,
                phy=phy,
                mode=mode,
                active=active,
                seed=seed,
                horizon_slots=scenario_section.get("horizon_slots", 200_000)
                if scenario_section.get("horizon_us") is None else
                scenario_section.get("horizon_slots"),
                horizon_us=scenario_section.get("horizon_us"),
                warmup_slots=scenario_section.get("warmup_slots", 20_000),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f"scenario: {e}") from e

    base_seed = scenario_section.get("seed", 1)
    if not isinstance(base_seed, int) or isinstance(base_seed, bool):
        raise ConfigError("scenario.seed: integer required")
    n_nodes = scenario_section["n_nodes"]

    sweep_section = doc.get("sweep")
    scenarios: list[LabeledScenario] = []
    x_axis = metric = None
    engine = "sim"
    seeds: tuple[int, ...] = ()

    if final_command == "sweep":
        if not isinstance(sweep_section, dict):
            raise ConfigError("sweep: section required for the sweep command")
        _require_keys(sweep_section,
                      {"axis", "values", "policies", "metric", "engine", "seeds"},
                      "sweep")
        x_axis = sweep_section.get("axis")
        if x_axis not in SWEEP_AXES:
            raise ConfigError(f"sweep.axis: expected one of {SWEEP_AXES}, got {x_axis!r}")
        values = sweep_section.get("values")
        if not isinstance(values, list) or not values:
            raise ConfigError("sweep.values: non-empty list required")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                   for v in values):
            raise ConfigError("sweep.values: entries must be numbers")
        policy_specs = sweep_section.get("policies")
        if not isinstance(policy_specs, list) or not policy_specs:
            raise ConfigError("sweep.policies: non-empty list required")
        metric = sweep_section.get("metric", "nst")
        if metric not in METRICS:
            raise ConfigError(f"sweep.metric: expected one of {sorted(METRICS)}, "
                              f"got {metric!r}")
        engine = sweep_section.get("engine", "sim")
        if engine not in ("sim", "model"):
            raise ConfigError("sweep.engine: expected 'sim' or 'model'")
        raw_seeds = sweep_section.get("seeds", [base_seed])
        if (not isinstance(raw_seeds, list) or not raw_seeds
                or not all(isinstance(s, int) and not isinstance(s, bool)
                           for s in raw_seeds)):
            raise ConfigError("sweep.seeds: non-empty list of integers required")
        seeds = tuple(raw_seeds)

        base_policy = doc.get("policy", {})
        if isinstance(base_policy, str):
            base_policy = {"name": base_policy}
        if not isinstance(base_policy, dict):
            raise ConfigError("policy: expected a string or object")
        parsed = [_parse_policy_spec(s, f"sweep.policies[{i}]")
                  for i, s in enumerate(policy_specs)]
        labels = [label for _, label, _ in parsed]
        if len(set(labels)) != len(labels):
            raise ConfigError("sweep.policies: labels must be unique")
        for x in values:
            for name, label, overrides in parsed:
                merged = dict(overrides)
                n = n_nodes
                if x_axis == "n_nodes":
                    n = int(x)
                elif x_axis == "t_cw":
                    if name == "beb":
                        raise ConfigError("sweep.axis t_cw applies only to arb policies")
                    merged["t_cw"] = int(x)
                elif x_axis == "halving_prob_f":
                    if name != "arb-halving":
                        raise ConfigError("sweep.axis halving_prob_f applies only "
                                          "to arb-halving")
                    merged["halving_prob_f"] = float(x)
                base_overrides = dict(base_policy)
                base_overrides.pop("name", None)
                base_overrides.pop("label", None)
                base_overrides.update(merged)
                params = _build_policy_params(base_overrides,
                                              f"sweep.policies[{label}]")
                scenarios.append(LabeledScenario(
                    label=label, x_value=float(x),
                    config=scenario_for(name, params, n, base_seed)))
    else:
        policy_section = doc.get("policy", {"name": "beb"})
        name, label, overrides = _parse_policy_spec(policy_section, "policy",
                                                    require_name=False)
        params = _build_policy_params(overrides, "policy")
        scenarios.append(LabeledScenario(
            label=label, x_value=None,
            config=scenario_for(name, params, n_nodes, base_seed)))
        seeds = (base_seed,)

    output_section = doc.get("output", {})
    if not isinstance(output_section, dict):
        raise ConfigError("output: expected an object")
    _require_keys(output_section, {"path", "format"}, "output")
    output_format = output_section.get("format", "csv")
    if output_format not in ("csv", "json"):
        raise ConfigError(f"output.format: expected 'csv' or 'json', got {output_format!r}")

    normalized = dict(doc)
    normalized["command"] = final_command
    return RunManifest(
        command=final_command,
        scenarios=tuple(scenarios),
        profile=profile,
        output_path=output_section.get("path"),
        output_format=output_format,
        model_options=opts,
        x_axis=x_axis,
        metric=metric,
        engine=engine,
        seeds=seeds,
        source=normalized,
    )


def serialize_manifest(manifest: RunManifest) -> str:
    """Canonical JSON for a manifest; ``parse_config`` round-trips it."""
    return json.dumps(manifest.source, indent=2, sort_keys=True)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def emit_series(header: list[str], rows: list[list], manifest: RunManifest,
                stream=None) -> None:
    """Write rows as CSV (or a JSON mirror) to the manifest's output path.

    Files are written atomically: a temp file in the destination directory
    is renamed over the target, so a failed run never leaves partial output.
    """
    if not rows:
        raise ConfigError("nothing to emit: empty result set")
    if manifest.output_format == "csv":
        text = ",".join(header) + "\n"
        for row in rows:
            text += ",".join(_fmt(v) for v in row) + "\n"
    else:
        records = [dict(zip(header, row)) for row in rows]
        text = json.dumps(records, indent=2) + "\n"

    if manifest.output_path is None:
        (stream or sys.stdout).write(text)
        return
    dest = os.path.abspath(manifest.output_path)
    os.makedirs(os.path.dirname(dest), exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(dest), suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, dest)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _analytic_for(scenario: ScenarioConfig, opts: ModelOptions):
    durations = slot_durations(scenario.phy, scenario.mode)
    windows = scenario.make_policy().windows()
    idle = durations.t_idle_us if opts.idle_slot == "slot" \
        else scenario.phy.prop_delay_us
    return evaluate(
        scenario.active_count, windows, durations,
        scenario.phy.payload_bits, scenario.phy.data_rate_bps,
        scenario.policy.retry_limit,
        idle_slot_us=idle,
        normalization=opts.normalization,
        window_sum_delay=opts.window_sum_delay,
    )


def _mean(values: list[float]) -> float:
    finite = [v for v in values if not math.isnan(v)]
    return sum(finite) / len(finite) if finite else math.nan


def run_manifest(manifest: RunManifest, stream=None) -> None:
    if manifest.command == "analyze":
        header = ["label", "n_nodes", "tau", "p", "residual", "s_norm",
                  "throughput_bps", "p_drop", "e_delay_us"]
        rows = []
        for item in manifest.scenarios:
            sol, m = _analytic_for(item.config, manifest.model_options)
            rows.append([item.label, item.config.active_count, sol.tau, sol.p,
                         sol.residual, m.throughput_norm, m.throughput_bps,
                         m.p_drop, m.e_delay_us])
        emit_series(header, rows, manifest, stream)

    elif manifest.command == "simulate":
        header = ["label", "seed", "n_nodes", "policy"] + list(SimMetrics.CSV_FIELDS)
        rows = []
        for item in manifest.scenarios:
            metrics = run(item.config)
            rows.append([item.label, item.config.seed, item.config.active_count,
                         item.config.policy_name]
                        + [getattr(metrics, f) for f in SimMetrics.CSV_FIELDS])
        emit_series(header, rows, manifest, stream)

    elif manifest.command == "compare":
        header = ["metric", "n_nodes", "sim", "analytic", "rel_error_pct"]
        rows = []
        for item in manifest.scenarios:
            sim_metrics = run(item.config)
            sol, m = _analytic_for(item.config, manifest.model_options)
            report = compare(sim_metrics, m,
                             extra_sim={"p": sim_metrics.measured_p,
                                        "tau": sim_metrics.measured_tau},
                             extra_analytic={"p": sol.p, "tau": sol.tau})
            for name, (sv, av, rel) in report.items():
                rows.append([name, item.config.active_count, sv, av,
                             "undefined" if rel is None else 100.0 * rel])
        emit_series(header, rows, manifest, stream)

    elif manifest.command == "sweep":
        unit, sim_get, model_get = METRICS[manifest.metric]
        labels = []
        for item in manifest.scenarios:
            if item.label not in labels:
                labels.append(item.label)
        colname = {lab: f"{manifest.metric}_{lab}" + (f"_{unit}" if unit else "")
                   for lab in labels}
        by_x: dict[float, dict[str, float]] = {}
        for item in manifest.scenarios:
            if manifest.engine == "model":
                sol, m = _analytic_for(item.config, manifest.model_options)
                value = model_get(sol, m)
            else:
                samples = []
                for seed in manifest.seeds:
                    metrics = run(replace(item.config, seed=seed))
                    samples.append(sim_get(metrics))
                value = _mean(samples)
            by_x.setdefault(item.x_value, {})[item.label] = value
        header = [manifest.x_axis] + [colname[lab] for lab in labels]
        rows = [[x] + [cells.get(lab, math.nan) for lab in labels]
                for x, cells in by_x.items()]
        emit_series(header, rows, manifest, stream)

    else:  # pragma: no cover - parse_config rejects unknown commands
        raise ConfigError(f"unknown command {manifest.command!r}")


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="backofflab",
        description="CSMA/CA backoff analysis: closed-form model and "
                    "slot-accurate simulation.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("analyze", "evaluate the closed-form model"),
            ("simulate", "run the slot-accurate simulator"),
            ("compare", "simulation vs model relative errors"),
            ("sweep", "metric series across an axis")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON config document")
        p.add_argument("--output", help="output file (default: config value or stdout)")
        p.add_argument("--format", choices=("csv", "json"),
                       help="output format (default: config value or csv)")
        p.add_argument("--seed", type=int, help="override every scenario seed")
        p.add_argument("--profile", choices=sorted(PROFILES),
                       help="override the parameter profile")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_arg_parser().parse_args(argv)
    try:
        with open(args.config) as f:
            text = f.read()
    except OSError as e:
        print(f"error: cannot read config: {e}", file=sys.stderr)
        return 2
    try:
        doc = json.loads(text)
        if isinstance(doc, dict):
            if args.profile:
                doc["profile"] = args.profile
            if args.seed is not None:
                doc.setdefault("scenario", {})["seed"] = args.seed
                if "sweep" in doc and isinstance(doc["sweep"], dict):
                    doc["sweep"]["seeds"] = [args.seed]
            if args.output or args.format:
                out = dict(doc.get("output", {}))
                if args.output:
                    out["path"] = args.output
                if args.format:
                    out["format"] = args.format
                doc["output"] = out
            text = json.dumps(doc)
        manifest = parse_config(text, command=args.command)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        run_manifest(manifest)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
