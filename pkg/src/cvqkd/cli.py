"""Experiment runner: configuration, the four workflows and a transcript
verifier, with bit-exact reproducible outputs.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 protocol failure (all frames rejected, or an inconclusive channel test).
Worker count changes wall time only; every parallel reduction merges in
fixed input order, so outputs are byte-identical for any ``--workers``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, distill, epanalysis, estimate, rates, slicing
from .channel import ChannelModel, ModulationSpec, from_loss_db
from .mathcore import DomainError, IntegrationError, RandomStream

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PROTOCOL = 4

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "variance": {"type": "number", "exclusiveMinimum": 0},
        "losses_db": {
            "type": "array", "items": {"type": "number", "minimum": 0},
            "minItems": 1,
        },
        "loss_db": {"type": "number", "minimum": 0},
        "slices": {"type": "integer", "minimum": 1, "maximum": 3},
        "slice_spec": {
            "type": "object",
            "properties": {
                "path": {"type": "string"},
                "m": {"type": "integer", "minimum": 1},
                "boundaries": {"type": "array", "items": {"type": "number"}},
                "variance": {"type": "number"},
                "version": {"type": "integer"},
            },
        },
        "block_length": {"type": "integer", "minimum": 1024},
        "frames": {"type": "integer", "minimum": 1},
        "beta": {"type": "number", "minimum": 0},
        "margin": {"type": "integer", "minimum": 0},
        "n_samples": {"type": "integer", "minimum": 1},
        "n_max": {"type": "integer", "minimum": 1},
        "epsilon": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "workers": {"type": "integer", "minimum": 1},
        "zero_noise_debug": {"type": "boolean"},
        "optimizer": {
            "type": "object",
            "properties": {"max_evals": {"type": "integer", "minimum": 2}},
        },
    },
    "required": ["seed"],
    "additionalProperties": False,
}

DEFAULTS = {
    "variance": 31.0,
    "slices": 2,
    "block_length": 16384,
    "frames": 100,
    "beta": 0.15,
    "margin": 64,
    "n_samples": 100000,
    "n_max": 400,
    "epsilon": 1e-3,
    "workers": 1,
    "zero_noise_debug": False,
}


class ConfigError(Exception):
    pass


def load_config(path, seed_override=None, workers_override=None):
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        paths = "; ".join(
            f"{'/'.join(str(p) for p in e.absolute_path) or '<root>'}: {e.message}"
            for e in errors
        )
        raise ConfigError(f"config validation failed: {paths}")
    config = {**DEFAULTS, **raw}
    if seed_override is not None:
        config["seed"] = seed_override
    if workers_override is not None:
        config["workers"] = workers_override
    return config


def config_hash(config):
    """Hash of everything that can influence results (worker count cannot)."""
    effective = {k: v for k, v in config.items() if k != "workers"}
    blob = json.dumps(effective, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def resolve_spec(config):
    doc = config.get("slice_spec")
    if doc is None:
        return slicing.default_equiprobable_spec(
            config["slices"], config["variance"]
        )
    if "path" in doc:
        try:
            doc = json.loads(Path(doc["path"]).read_text())
        except OSError as exc:
            raise ConfigError(f"slice spec file unreadable: {exc}") from exc
    try:
        return slicing.SliceSpec.from_json({"version": 1, **doc})
    except (KeyError, DomainError) as exc:
        raise ConfigError(f"invalid slice spec: {exc}") from exc


def _pool_map(workers):
    if workers <= 1:
        return None, map
    pool = ProcessPoolExecutor(max_workers=workers)
    return pool, pool.map


def _write(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, bytes):
        path.write_bytes(data)
    else:
        path.write_text(data)


def _stamp(config):
    return {"toolkit_version": __version__, "config_sha256": config_hash(config)}


def _rate_row_task(args):
    spec, loss_db = args
    return epanalysis.rate_row(spec, loss_db)


def cmd_rates(config, out_dir):
    if "losses_db" not in config:
        raise ConfigError("rates needs 'losses_db' (non-empty list)")
    spec = resolve_spec(config)
    losses = config["losses_db"]
    pool, map_fn = _pool_map(config["workers"])
    try:
        rows = list(map_fn(_rate_row_task, [(spec, l) for l in losses]))
    finally:
        if pool:
            pool.shutdown()
    mod = ModulationSpec(variance=config["variance"])
    asym = [rates.asymptotic_rates(mod, from_loss_db(l)) for l in losses]
    stamp = _stamp(config)
    csv_text = epanalysis.rows_to_csv(
        rows,
        extra_columns={
            "asymptotic_direct": [a.direct_rate for a in asym],
            "asymptotic_reverse": [a.reverse_rate for a in asym],
        },
        header_comments=[
            f"toolkit_version={stamp['toolkit_version']}",
            f"config_sha256={stamp['config_sha256']}",
        ],
    )
    doc = epanalysis.rows_to_json(rows, extra=stamp)
    for row_doc, a in zip(doc["rows"], asym):
        row_doc["asymptotic"] = {
            "i_xy": a.i_xy, "i_xe": a.i_xe, "i_xpe": a.i_xpe,
            "direct_rate": a.direct_rate, "reverse_rate": a.reverse_rate,
        }
    _write(out_dir / "rates.csv", csv_text)
    _write(out_dir / "rates.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_distill(config, out_dir):
    if "loss_db" not in config:
        raise ConfigError("distill needs 'loss_db'")
    spec = resolve_spec(config)
    channel = from_loss_db(config["loss_db"])
    pool, map_fn = _pool_map(config["workers"])
    try:
        report = distill.run_distillation(
            spec,
            channel,
            l=config["block_length"],
            frames=config["frames"],
            beta=config["beta"],
            margin=config["margin"],
            stream=RandomStream(config["seed"]),
            zero_noise=config["zero_noise_debug"],
            map_fn=map_fn,
        )
    finally:
        if pool:
            pool.shutdown()
    doc = {
        **_stamp(config),
        "frames_total": report.frames_total,
        "frames_accepted": report.frames_accepted,
        "frame_error_rate": report.frame_error_rate,
        "key_bits": report.key_bits,
        "key_rate_per_sample": report.key_rate_per_sample,
        "block_length": report.block_length,
        "included_slices": report.included_slices,
        "code_rows": {str(k): v for k, v in report.code_rows.items()},
        "e_b": {str(k): v for k, v in report.e_b.items()},
        "e_p": {str(k): v for k, v in report.e_p.items()},
        "leakage": {
            "syndrome_bits_per_slice": {
                str(k): v
                for k, v in report.ledger.syndrome_bits_per_slice.items()
            },
            "syndrome_bits_total": report.ledger.syndrome_bits_total,
            "verification_bits": report.ledger.verification_bits,
            "continuous_side_info": report.ledger.continuous_side_info,
        },
        "frame_status": report.frame_status,
    }
    _write(out_dir / "alice_key.bin", np.packbits(report.alice_key).tobytes())
    _write(out_dir / "bob_key.bin", np.packbits(report.bob_key).tobytes())
    _write(out_dir / "transcript.bin", report.transcript)
    _write(
        out_dir / "distill_report.json",
        json.dumps(doc, indent=2, sort_keys=True) + "\n",
    )
    if report.frames_accepted == 0:
        print("all frames failed reconciliation", file=sys.stderr)
        return EXIT_PROTOCOL
    return EXIT_OK


def cmd_tomography(config, out_dir):
    if "loss_db" not in config:
        raise ConfigError("tomography needs 'loss_db'")
    spec = resolve_spec(config)
    channel = from_loss_db(config["loss_db"])
    mod = ModulationSpec(variance=config["variance"])
    n = config["n_samples"]
    samples = estimate.sample_homodyne(
        mod, channel, "uniform", n, RandomStream(config["seed"])
    )
    cutoff = estimate.photon_cutoff_test(
        samples, config["n_max"], config["epsilon"]
    )
    doc = {**_stamp(config), "cutoff_test": {
        "verdict": cutoff.verdict,
        "threshold": cutoff.threshold,
        "exceedances": cutoff.exceedances,
        "tail_estimate": cutoff.tail_estimate,
        "upper_bound": cutoff.upper_bound,
    }}
    status = EXIT_OK
    try:
        report = estimate.estimated_rate_report(samples, spec, mod)
        doc["estimation"] = report.to_json()
    except DomainError as exc:
        doc["estimation"] = {"error": str(exc)}
        status = EXIT_PROTOCOL
    if cutoff.verdict != "pass":
        status = EXIT_PROTOCOL
    _write(
        out_dir / "tomography_report.json",
        json.dumps(doc, indent=2, sort_keys=True) + "\n",
    )
    if status != EXIT_OK:
        print(
            f"tomography did not certify the channel "
            f"(cutoff verdict: {cutoff.verdict})",
            file=sys.stderr,
        )
    return status


def cmd_optimize(config, out_dir):
    if "loss_db" not in config:
        raise ConfigError("optimize needs 'loss_db'")
    spec = resolve_spec(config)
    channel = from_loss_db(config["loss_db"])
    max_evals = config.get("optimizer", {}).get("max_evals", 200)
    result = slicing.optimize_slices(
        channel, spec.m, spec, max_evals=max_evals
    )
    before = epanalysis.rate_row(spec, config["loss_db"])
    after = epanalysis.rate_row(result.spec, config["loss_db"])
    doc = {
        **_stamp(config),
        "converged": result.converged,
        "evaluations": result.evaluations,
        "objective_before": result.initial_objective,
        "objective_after": result.objective,
        "spec_before": spec.to_json(),
        "spec_after": result.spec.to_json(),
        "rates": epanalysis.rows_to_json([before, after]),
    }
    _write(
        out_dir / "optimized_spec.json",
        json.dumps(result.spec.to_json(), indent=2, sort_keys=True) + "\n",
    )
    _write(
        out_dir / "optimize_report.json",
        json.dumps(doc, indent=2, sort_keys=True) + "\n",
    )
    if not result.converged:
        print("optimizer budget exhausted; wrote best spec found", file=sys.stderr)
    return EXIT_OK


def cmd_verify_transcript(config, out_dir, transcript_path, report_path):
    transcript = Path(transcript_path).read_bytes()
    report = json.loads(Path(report_path).read_text())
    replayed = distill.replay_ledger(transcript)
    recorded = report["leakage"]
    ok = (
        replayed["syndrome_bits_total"] == recorded["syndrome_bits_total"]
        and replayed["verification_bits"] == recorded["verification_bits"]
        and {int(k): v for k, v in recorded["syndrome_bits_per_slice"].items()}
        == replayed["syndrome_bits_per_slice"]
        and replayed["frames"] == report["frames_total"]
    )
    print(json.dumps({"replayed": replayed, "match": ok}, sort_keys=True))
    return EXIT_OK if ok else EXIT_PROTOCOL


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cvqkd",
        description=(
            "Coherent-state key distribution simulator with sliced-error-"
            "correction reconciliation"
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("rates", "distill", "tomography", "optimize"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out", default=".")
    v = sub.add_parser("verify-transcript")
    v.add_argument("--transcript", required=True)
    v.add_argument("--report", required=True)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify-transcript":
            return cmd_verify_transcript(
                None, None, args.transcript, args.report
            )
        config = load_config(
            args.config, seed_override=args.seed, workers_override=args.workers
        )
        out_dir = Path(args.out)
        handler = {
            "rates": cmd_rates,
            "distill": cmd_distill,
            "tomography": cmd_tomography,
            "optimize": cmd_optimize,
        }[args.command]
        return handler(config, out_dir)
    except (ConfigError, DomainError) as exc:
        print(json.dumps({"error": {"kind": "config", "message": str(exc)}}),
              file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as exc:
        print(json.dumps({"error": {"kind": "numerical", "message": str(exc)}}),
              file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
