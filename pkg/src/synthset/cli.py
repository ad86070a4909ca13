"""Command-line interface.

Subcommands: generate, validate, stats, split, eval, curve. Every generate
flag overrides its counterpart from the JSON config file. Exit codes: 0
success, 2 configuration error, 3 backend/transport error, 4 quota failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .catalog import DEFAULT_BRANDS
from .dataset import (
    dataset_stats,
    load_real_samples,
    load_split_rule,
    read_manifest,
    render_table,
    split_distribution,
    split_real,
    validate_dataset,
)
from .errors import (
    CatalogParseError,
    ConfigError,
    ConsistencyError,
    InputError,
    ProtocolError,
    QuotaExhaustedError,
    RequestError,
    ResumeError,
    SynthsetError,
    TemplateError,
    TransportError,
)
from .metrics import (
    accuracy,
    aggregate_runs,
    confusion,
    curve_csv,
    curve_svg,
    load_predictions,
    load_runs,
    macro_accuracy,
    per_class_accuracy,
    render_normalized,
    throughput_report,
)
from .orchestrator import resume as resume_run
from .orchestrator import run as run_pipeline
from .pipelineconfig import from_payload, load_snapshot

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_QUOTA = 4

_CONFIG_ERRORS = (ConfigError, CatalogParseError, TemplateError, ResumeError, InputError, ConsistencyError)
_BACKEND_ERRORS = (TransportError, RequestError, ProtocolError)


def _parse_kv_fractions(text: str) -> dict[str, float]:
    out = {}
    for part in text.split(","):
        if "=" not in part:
            raise ConfigError(f"expected key=value pairs, got {text!r}")
        key, value = part.split("=", 1)
        out[key.strip()] = float(value)
    return out


def _build_generate_config(args) -> dict:
    if args.config:
        try:
            payload = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(payload, dict):
            raise ConfigError("config file must hold a JSON object")
    else:
        payload = {}

    def section(name: str) -> dict:
        payload.setdefault(name, {})
        return payload[name]

    if args.catalog:
        section("catalog")["path"] = args.catalog
    if args.brands:
        section("catalog")["brands"] = [b.strip() for b in args.brands.split(",") if b.strip()]
    if args.min_year is not None:
        section("catalog")["min_year"] = args.min_year
    if args.total is not None:
        section("plan")["total"] = args.total
    if args.balance:
        section("plan")["balance"] = args.balance
    if args.seed is not None:
        section("plan")["seed"] = args.seed
    if args.mode_mix:
        section("plan")["mode_mix"] = _parse_kv_fractions(args.mode_mix)
    if args.template:
        try:
            section("prompt")["template"] = Path(args.template).read_text(encoding="utf-8").strip()
        except OSError as exc:
            raise ConfigError(f"cannot read template {args.template}: {exc}") from exc
    if args.colors:
        section("prompt")["colors"] = [c.strip() for c in args.colors.split(",") if c.strip()]
    if args.backend:
        for mode_key in ("t2i", "i2i"):
            section("synthesis").setdefault(mode_key, {})["kind"] = args.backend
    if args.backend_url:
        for mode_key in ("t2i", "i2i"):
            section("synthesis").setdefault(mode_key, {})["url"] = args.backend_url
    if args.fault_profile:
        p0, p2 = (float(v) for v in args.fault_profile.split(","))
        for mode_key in ("t2i", "i2i"):
            section("synthesis").setdefault(mode_key, {})["fault_profile"] = [p0, p2]
    if args.timeout_secs is not None:
        for mode_key in ("t2i", "i2i"):
            section("synthesis").setdefault(mode_key, {})["timeout_secs"] = args.timeout_secs
    if args.size is not None:
        section("synthesis")["size"] = args.size
    if args.base_pool:
        section("base_pool")["path"] = args.base_pool
    if args.detector:
        section("gate")["detector"] = args.detector
    if args.detector_url:
        section("gate")["url"] = args.detector_url
    if args.min_confidence is not None:
        section("gate")["min_confidence"] = args.min_confidence
    if args.vehicle_labels:
        section("gate")["vehicle_labels"] = [v.strip() for v in args.vehicle_labels.split(",") if v.strip()]
    if args.target_size is not None:
        section("augment")["target_size"] = args.target_size
    if args.rotation_max is not None:
        section("augment")["rotation_max_degrees"] = args.rotation_max
    if args.no_augment:
        section("augment")["rotation_max_degrees"] = 0.0
    if args.out:
        payload["output_dir"] = args.out
    if args.workers is not None:
        payload["workers"] = args.workers
    if args.max_attempts is not None:
        payload["max_attempts_per_slot"] = args.max_attempts
    if args.keep_rejected:
        payload["keep_rejected"] = True
    return payload


def _cmd_generate(args) -> int:
    if args.resume and args.out and not args.config:
        # Resume from the directory's own snapshot; flags other than --out
        # are rejected to avoid silently diverging from it.
        stats = resume_run(args.out)
    else:
        payload = _build_generate_config(args)
        config = from_payload(payload)
        stats = run_pipeline(config, resume=args.resume)
    print(json.dumps(stats.to_payload(), indent=2))
    return EXIT_OK


def _cmd_validate(args) -> int:
    problems = validate_dataset(args.dataset_dir)
    if problems:
        for p in problems:
            print(f"INVALID: {p}")
        return 1
    print("ok")
    return EXIT_OK


def _cmd_stats(args) -> int:
    dataset_dir = Path(args.dataset_dir)
    config = load_snapshot(dataset_dir / "config.json")
    records = read_manifest(dataset_dir / "manifest.jsonl")
    stats = dataset_stats(records, tuple(config.catalog.brands))
    print(json.dumps(stats, indent=2))
    report = throughput_report(records)
    print(json.dumps(report, indent=2))
    return EXIT_OK


def _cmd_split(args) -> int:
    samples = load_real_samples(args.samples)
    rule = load_split_rule(args.rule)
    split = split_real(samples, rule)
    brands = tuple(b.strip() for b in args.brands.split(",")) if args.brands else DEFAULT_BRANDS
    rows = split_distribution(split, brands)
    rows.append(
        {
            "brand": "total",
            "validation": len(split["validation"]),
            "test": len(split["test"]),
        }
    )
    print(render_table(rows, ["brand", "validation", "test"]), end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name in ("validation", "test"):
            (out / f"{name}.txt").write_text(
                "".join(s.image_path + "\n" for s in split[name]), encoding="utf-8"
            )
    return EXIT_OK


def _cmd_eval(args) -> int:
    preds = load_predictions(args.preds)
    brands = tuple(b.strip() for b in args.brands.split(",")) if args.brands else DEFAULT_BRANDS
    cm = confusion(preds, brands)

    count_rows = []
    for brand, row in zip(brands, cm.counts):
        count_rows.append({"actual": brand, **{b: c for b, c in zip(brands, row)}})
    print("counts:")
    print(render_table(count_rows, ["actual", *brands]), end="")

    print("row-normalized:")
    if args.rounded:
        rendered = render_normalized(cm)
        norm_rows = [
            {"actual": brand, **{b: cell for b, cell in zip(brands, row)}}
            for brand, row in zip(brands, rendered)
        ]
    else:
        norm_rows = [
            {"actual": brand, **{b: f"{v:.4f}" for b, v in zip(brands, row)}}
            for brand, row in zip(brands, cm.row_normalized)
        ]
    print(render_table(norm_rows, ["actual", *brands]), end="")

    print(f"accuracy: {accuracy(preds, brands):.4f}")
    if args.macro:
        print(f"macro accuracy: {macro_accuracy(preds, brands):.4f}")
    per_class = per_class_accuracy(preds, brands)
    for brand in brands:
        print(f"  {brand}: {per_class[brand]:.4f}")
    return EXIT_OK


def _cmd_curve(args) -> int:
    series = load_runs(args.runs)
    rows = aggregate_runs(series)
    display = [
        {
            "dataset_size": r["dataset_size"],
            "repetitions": r["repetitions"],
            "mean": f"{r['mean']:.4f}",
            "std": f"{r['std']:.4f}",
            "band": f"{r['band_low']:.4f}..{r['band_high']:.4f}",
        }
        for r in rows
    ]
    print(render_table(display, ["dataset_size", "repetitions", "mean", "std", "band"]), end="")
    if args.csv:
        Path(args.csv).write_text(curve_csv(rows), encoding="utf-8")
    if args.svg:
        Path(args.svg).write_text(curve_svg(rows), encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="synthset")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="run the dataset generation pipeline")
    g.add_argument("--config", help="JSON config file; flags override its values")
    g.add_argument("--catalog", help="catalog CSV path")
    g.add_argument("--brands", help="comma-separated brand whitelist")
    g.add_argument("--min-year", type=int, dest="min_year")
    g.add_argument("--total", type=int)
    g.add_argument("--balance", choices=["iid", "quota"])
    g.add_argument("--seed", type=int)
    g.add_argument("--mode-mix", dest="mode_mix", help="e.g. t2i=0.5,i2i=0.5")
    g.add_argument("--template", help="prompt template file")
    g.add_argument("--colors", help="comma-separated color list")
    g.add_argument("--backend", choices=["mock", "http"])
    g.add_argument("--backend-url", dest="backend_url")
    g.add_argument("--fault-profile", dest="fault_profile", help="mock p_zero,p_two (e.g. 0.1,0.2)")
    g.add_argument("--size", type=int, help="txt2img output size (pixels)")
    g.add_argument("--timeout-secs", type=float, dest="timeout_secs")
    g.add_argument("--base-pool", dest="base_pool", help="img2img base pool manifest (JSON)")
    g.add_argument("--detector", choices=["mock-oracle", "mock-blob", "http"])
    g.add_argument("--detector-url", dest="detector_url")
    g.add_argument("--min-confidence", type=float, dest="min_confidence")
    g.add_argument("--vehicle-labels", dest="vehicle_labels", help="comma-separated class names")
    g.add_argument("--target-size", type=int, dest="target_size")
    g.add_argument("--rotation-max", type=float, dest="rotation_max")
    g.add_argument("--no-augment", action="store_true", dest="no_augment")
    g.add_argument("--out", help="output dataset directory")
    g.add_argument("--workers", type=int)
    g.add_argument("--max-attempts", type=int, dest="max_attempts")
    g.add_argument("--keep-rejected", action="store_true", dest="keep_rejected")
    g.add_argument("--resume", action="store_true")
    g.set_defaults(func=_cmd_generate)

    v = sub.add_parser("validate", help="check every dataset invariant; exit 0/1")
    v.add_argument("dataset_dir")
    v.set_defaults(func=_cmd_validate)

    s = sub.add_parser("stats", help="histograms, balance flag and throughput")
    s.add_argument("dataset_dir")
    s.set_defaults(func=_cmd_stats)

    sp = sub.add_parser("split", help="partition real samples by camera/time rule")
    sp.add_argument("--samples", required=True, help="CSV: image_path,brand,camera_id,recorded_at")
    sp.add_argument("--rule", required=True, help="JSON split rule")
    sp.add_argument("--brands", help="comma-separated brand list for the table")
    sp.add_argument("--out", help="write validation.txt/test.txt lists here")
    sp.set_defaults(func=_cmd_split)

    e = sub.add_parser("eval", help="confusion matrix and accuracies from predictions")
    e.add_argument("--preds", required=True, help="CSV: sample_id,actual,predicted")
    e.add_argument("--brands", help="comma-separated brand list")
    e.add_argument("--rounded", action="store_true", help="2-decimal truncated cells, blanks for zero")
    e.add_argument("--macro", action="store_true", help="also print macro-averaged accuracy")
    e.set_defaults(func=_cmd_eval)

    c = sub.add_parser("curve", help="aggregate repeated runs into a learning curve")
    c.add_argument("--runs", required=True, help="CSV: dataset_size,accuracy (one row per repetition)")
    c.add_argument("--csv", help="write the aggregated table as CSV")
    c.add_argument("--svg", help="write a plot artifact as SVG")
    c.set_defaults(func=_cmd_curve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _BACKEND_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except QuotaExhaustedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_QUOTA
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SynthsetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
