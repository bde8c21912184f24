"""Command-line pipelines: build-db, build-index, link, evaluate, curve,
reverse-geocode, split.

Settings resolve as defaults < JSON config file < explicit flags. Every
output file gets a "<name>.meta.json" sidecar carrying the effective
config and its sha256 hash, and all outputs are byte-deterministic for
a fixed config and seed (with deterministic providers).

Exit codes: 0 ok, 1 input/configuration error, 2 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import traceback
from pathlib import Path

from .embedding import CapturingProvider, ProviderError, provider_from_spec
from .evaluation import (
    DEFAULT_THRESHOLDS,
    evaluation_report,
    precision_coverage_curve,
    split_train_test,
    write_curve_csv,
)
from .gazetteer import (
    GazetteerConfig,
    Granularity,
    granularity_counts,
    parse_gazetteer,
    filter_entities,
    read_database,
    write_database,
)
from .index import (
    LocationIndex,
    PruneConfig,
    build_name_index,
    build_user_index,
    read_mentions,
    write_mentions,
)
from .linker import Prediction, link_batch, write_predictions
from .gazetteer import NULL_TRIPLE
from .reverse_geocode import CityLocator

ENDPOINT_ENV_VAR = "GEOLINKER_EMBED_ENDPOINT"
_FALLBACK_PROVIDER = "hash:256:0"

# Every key a config file may set, with per-command defaults below.
_COMMAND_DEFAULTS: dict[str, dict] = {
    "build-db": {
        "gazetteer": None,
        "admin1": None,
        "country_info": None,
        "admin2": None,
        "min_population": 15_000,
        "out": None,
    },
    "build-index": {
        "database": None,
        "provider": None,
        "provider_tag": None,
        "strategy": "usergeo",
        "mentions": None,
        "variants": False,
        "prune": True,
        "prune_multiplier": 1.0,
        "exempt_supplemental": True,
        "jobs": 1,
        "out": None,
    },
    "link": {
        "index": None,
        "provider": None,
        "provider_tag": None,
        "inputs": None,
        "threshold": 0.0,
        "capture_vectors": None,
        "jobs": 1,
        "out": None,
    },
    "evaluate": {
        "index": None,
        "provider": None,
        "provider_tag": None,
        "mentions": None,
        "threshold": 0.0,
        "thresholds": None,
        "min_country_examples": 1,
        "jobs": 1,
        "out": None,
    },
    "curve": {
        "index": None,
        "provider": None,
        "provider_tag": None,
        "mentions": None,
        "thresholds": None,
        "jobs": 1,
        "out": None,
    },
    "reverse-geocode": {
        "database": None,
        "points": None,
        "out": None,
    },
    "split": {
        "mentions": None,
        "test_fraction": 0.1,
        "seed": 0,
        "train_out": None,
        "test_out": None,
    },
}

_ALL_KEYS = {key for defaults in _COMMAND_DEFAULTS.values() for key in defaults}


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        try:
            loaded = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"config {path}: invalid JSON ({exc})") from exc
    if not isinstance(loaded, dict):
        raise ValueError(f"config {path}: expected a JSON object")
    unknown = sorted(set(loaded) - _ALL_KEYS)
    if unknown:
        raise ValueError(f"config {path}: unknown keys {', '.join(unknown)}")
    return loaded


def _effective_config(args: argparse.Namespace, command: str) -> dict:
    cfg = dict(_COMMAND_DEFAULTS[command])
    loaded = _load_config(getattr(args, "config", None))
    for key, value in loaded.items():
        if key in cfg:
            cfg[key] = value
    for key in cfg:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _require(cfg: dict, command: str, *keys: str) -> None:
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise ValueError(f"{command}: missing required option(s) {flags}")


def _write_meta(out_path: str, command: str, cfg: dict) -> None:
    payload = json.dumps(
        {"command": command, "config": cfg}, sort_keys=True, ensure_ascii=False
    )
    digest = hashlib.sha256(payload.encode("utf-8")).hexdigest()
    meta = {"command": command, "config": cfg, "config_hash": digest}
    Path(out_path + ".meta.json").write_text(
        json.dumps(meta, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )


def _resolve_provider(cfg: dict):
    spec = cfg.get("provider") or os.environ.get(ENDPOINT_ENV_VAR) or _FALLBACK_PROVIDER
    cfg["provider"] = spec
    return provider_from_spec(spec, tag=cfg.get("provider_tag"))


def _read_input_lines(path: str) -> list[str]:
    with open(path, "r", encoding="utf-8", newline="\n") as fh:
        content = fh.read()
    lines = content.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def _parse_thresholds(value) -> list[float]:
    if value is None:
        return list(DEFAULT_THRESHOLDS)
    if isinstance(value, str):
        value = [part for part in value.split(",") if part.strip()]
    return [float(v) for v in value]


def cmd_build_db(args: argparse.Namespace) -> int:
    cfg = _effective_config(args, "build-db")
    _require(cfg, "build-db", "gazetteer", "admin1", "country_info", "out")
    gaz_config = GazetteerConfig(min_population=int(cfg["min_population"]))
    with open(cfg["gazetteer"], "r", encoding="utf-8", newline="\n") as dump, open(
        cfg["admin1"], "r", encoding="utf-8", newline="\n"
    ) as admin1, open(cfg["country_info"], "r", encoding="utf-8", newline="\n") as info:
        if cfg["admin2"] is not None:
            with open(cfg["admin2"], "r", encoding="utf-8", newline="\n") as admin2:
                result = parse_gazetteer(dump, admin1, info, gaz_config, admin2)
        else:
            result = parse_gazetteer(dump, admin1, info, gaz_config)
    entities = filter_entities(result.entities, gaz_config)
    if not entities:
        raise ValueError("no entities survived parsing and filtering")
    with open(cfg["out"], "w", encoding="utf-8", newline="\n") as out:
        count = write_database(entities, out)
    _write_meta(cfg["out"], "build-db", cfg)
    counts = granularity_counts(entities)
    print(
        f"wrote {count} entities to {cfg['out']}: "
        f"{counts['country']} countries, {counts['admin1']} admin1, {counts['city']} cities"
    )
    print(
        f"parse: {result.malformed} malformed, {result.ignored} ignored, "
        f"{result.warnings} warnings"
    )
    return 0


def cmd_build_index(args: argparse.Namespace) -> int:
    cfg = _effective_config(args, "build-index")
    _require(cfg, "build-index", "database", "out")
    strategy = cfg["strategy"]
    if strategy not in ("namegeo", "usergeo"):
        raise ValueError(f"unknown strategy {strategy!r}; use namegeo or usergeo")
    with open(cfg["database"], "r", encoding="utf-8", newline="\n") as fh:
        entities = read_database(fh)
    provider = _resolve_provider(cfg)
    try:
        if strategy == "namegeo":
            index = build_name_index(
                entities, provider, use_variants=bool(cfg["variants"]), jobs=int(cfg["jobs"])
            )
        else:
            _require(cfg, "build-index (usergeo)", "mentions")
            with open(cfg["mentions"], "r", encoding="utf-8", newline="\n") as fh:
                mentions = read_mentions(fh)
            prune = PruneConfig(
                enabled=bool(cfg["prune"]),
                multiplier=float(cfg["prune_multiplier"]),
                exempt_supplemental=bool(cfg["exempt_supplemental"]),
            )
            index = build_user_index(
                entities,
                mentions,
                provider,
                use_variants=bool(cfg["variants"]),
                prune=prune,
                jobs=int(cfg["jobs"]),
            )
    finally:
        provider.close()
    index.save(cfg["out"])
    _write_meta(cfg["out"], "build-index", cfg)
    print(f"wrote index with {len(index)} entries to {cfg['out']}")
    stats = index.build_stats
    if stats is not None:
        print(
            f"mentions: {stats.mentions_total} total, {stats.mentions_dropped} dropped; "
            f"pruned {stats.members_pruned}/{stats.members_prunable} prunable members "
            f"({stats.pruned_fraction:.1%})"
        )
    return 0


def cmd_link(args: argparse.Namespace) -> int:
    cfg = _effective_config(args, "link")
    _require(cfg, "link", "index", "inputs", "out")
    index = LocationIndex.load(cfg["index"])
    provider = _resolve_provider(cfg)
    if cfg["capture_vectors"] is not None:
        provider = CapturingProvider(provider)
    try:
        inputs = _read_input_lines(cfg["inputs"])
        predictions = link_batch(
            index, provider, inputs, float(cfg["threshold"]), jobs=int(cfg["jobs"])
        )
        if cfg["capture_vectors"] is not None:
            provider.save(cfg["capture_vectors"])
            _write_meta(cfg["capture_vectors"], "link", cfg)
    finally:
        provider.close()
    with open(cfg["out"], "w", encoding="utf-8", newline="\n") as out:
        write_predictions(inputs, predictions, out)
    _write_meta(cfg["out"], "link", cfg)
    accepted = sum(1 for p in predictions if p.accepted)
    print(f"linked {len(inputs)} inputs to {cfg['out']}; accepted {accepted}")
    return 0


def _load_labeled(cfg: dict) -> tuple[LocationIndex, list, list[str], list]:
    index = LocationIndex.load(cfg["index"])
    with open(cfg["mentions"], "r", encoding="utf-8", newline="\n") as fh:
        mentions = read_mentions(fh)
    if not mentions:
        raise ValueError(f"no mentions in {cfg['mentions']}")
    inputs = [m.user_input for m in mentions]
    truths = [m.truth for m in mentions]
    return index, mentions, inputs, truths


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _effective_config(args, "evaluate")
    _require(cfg, "evaluate", "index", "mentions", "out")
    index, _mentions, inputs, truths = _load_labeled(cfg)
    provider = _resolve_provider(cfg)
    try:
        raw = link_batch(index, provider, inputs, 0.0, jobs=int(cfg["jobs"]))
    finally:
        provider.close()
    threshold = float(cfg["threshold"])
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold {threshold!r} outside [0, 1]")
    effective = [
        p
        if p.triple.is_null() or p.score >= threshold
        else Prediction(NULL_TRIPLE, p.score, False)
        for p in raw
    ]
    report = evaluation_report(
        effective,
        truths,
        index=index,
        thresholds=_parse_thresholds(cfg["thresholds"]),
        min_examples=int(cfg["min_country_examples"]),
        scored=[(p.triple, p.score) for p in raw],
    )
    report["threshold"] = threshold
    with open(cfg["out"], "w", encoding="utf-8", newline="\n") as out:
        json.dump(report, out, sort_keys=True, ensure_ascii=False, indent=2)
        out.write("\n")
    _write_meta(cfg["out"], "evaluate", cfg)
    for level in Granularity:
        m = report["levels"][level.value]
        precision = "undefined" if m["precision"] is None else f"{m['precision']:.4f}"
        print(
            f"{level.value}: accuracy={m['accuracy']:.4f} coverage={m['coverage']:.4f} "
            f"precision={precision} (n={m['n']})"
        )
    return 0


def cmd_curve(args: argparse.Namespace) -> int:
    cfg = _effective_config(args, "curve")
    _require(cfg, "curve", "index", "mentions", "out")
    index, _mentions, inputs, truths = _load_labeled(cfg)
    provider = _resolve_provider(cfg)
    try:
        raw = link_batch(index, provider, inputs, 0.0, jobs=int(cfg["jobs"]))
    finally:
        provider.close()
    scored = [(p.triple, p.score) for p in raw]
    thresholds = _parse_thresholds(cfg["thresholds"])
    points_by_level = {
        level: precision_coverage_curve(scored, truths, level, thresholds)
        for level in Granularity
    }
    with open(cfg["out"], "w", encoding="utf-8", newline="\n") as out:
        write_curve_csv(points_by_level, out)
    _write_meta(cfg["out"], "curve", cfg)
    n_points = sum(len(points) for points in points_by_level.values())
    print(f"wrote {n_points} curve points to {cfg['out']}")
    return 0


def cmd_reverse_geocode(args: argparse.Namespace) -> int:
    cfg = _effective_config(args, "reverse-geocode")
    _require(cfg, "reverse-geocode", "database", "points", "out")
    with open(cfg["database"], "r", encoding="utf-8", newline="\n") as fh:
        entities = read_database(fh)
    cities = [e for e in entities if e.granularity is Granularity.CITY]
    if not cities:
        raise ValueError("database contains no city entities")
    locator = CityLocator(cities)
    count = 0
    with open(cfg["points"], "r", encoding="utf-8", newline="\n") as points, open(
        cfg["out"], "w", encoding="utf-8", newline="\n"
    ) as out:
        for lineno, line in enumerate(points, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"points line {lineno}: expected 'lat<TAB>lon'")
            latitude, longitude = float(parts[0]), float(parts[1])
            entity, dist = locator.locate(latitude, longitude)
            triple = entity.triple()
            out.write(
                "\t".join(
                    [
                        repr(latitude),
                        repr(longitude),
                        triple.city,
                        triple.admin1,
                        triple.country,
                        repr(dist),
                    ]
                )
                + "\n"
            )
            count += 1
    _write_meta(cfg["out"], "reverse-geocode", cfg)
    print(f"reverse-geocoded {count} points to {cfg['out']}")
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    cfg = _effective_config(args, "split")
    _require(cfg, "split", "mentions", "train_out", "test_out")
    with open(cfg["mentions"], "r", encoding="utf-8", newline="\n") as fh:
        mentions = read_mentions(fh)
    train, test = split_train_test(
        mentions, float(cfg["test_fraction"]), int(cfg["seed"])
    )
    with open(cfg["train_out"], "w", encoding="utf-8", newline="\n") as out:
        write_mentions(train, out)
    _write_meta(cfg["train_out"], "split", cfg)
    with open(cfg["test_out"], "w", encoding="utf-8", newline="\n") as out:
        write_mentions(test, out)
    _write_meta(cfg["test_out"], "split", cfg)
    print(f"split {len(mentions)} mentions into {len(train)} train / {len(test)} test")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geolinker",
        description="Link noisy location strings to a (city, admin1, country) database.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--config", help="JSON config file; flags override its values")
        return p

    p = add("build-db", cmd_build_db, "parse and filter a gazetteer dump")
    p.add_argument("--gazetteer", help="main tab-separated dump")
    p.add_argument("--admin1", help="admin1 code table")
    p.add_argument("--country-info", dest="country_info", help="country info table")
    p.add_argument("--admin2", help="optional admin2 code table")
    p.add_argument("--min-population", dest="min_population", type=int)
    p.add_argument("--out", help="filtered database TSV to write")

    p = add("build-index", cmd_build_index, "build a location index from a database")
    p.add_argument("--database", help="filtered database TSV")
    p.add_argument("--provider", help="hash[:DIM[:SEED]] | file:PATH | tcp://H:P | stdio:CMD")
    p.add_argument("--provider-tag", dest="provider_tag")
    p.add_argument("--strategy", choices=["namegeo", "usergeo"])
    p.add_argument("--mentions", help="labeled mentions TSV (usergeo)")
    p.add_argument("--variants", action=argparse.BooleanOptionalAction)
    p.add_argument("--prune", action=argparse.BooleanOptionalAction)
    p.add_argument("--prune-multiplier", dest="prune_multiplier", type=float)
    p.add_argument(
        "--exempt-supplemental", dest="exempt_supplemental",
        action=argparse.BooleanOptionalAction,
    )
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", help="index file to write")

    p = add("link", cmd_link, "link a file of inputs against an index")
    p.add_argument("--index")
    p.add_argument("--provider")
    p.add_argument("--provider-tag", dest="provider_tag")
    p.add_argument("--inputs", help="one raw user input per line")
    p.add_argument("--threshold", type=float)
    p.add_argument(
        "--capture-vectors", dest="capture_vectors",
        help="write every raw provider vector to this vector file",
    )
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", help="predictions TSV to write")

    p = add("evaluate", cmd_evaluate, "evaluate labeled mentions against an index")
    p.add_argument("--index")
    p.add_argument("--provider")
    p.add_argument("--provider-tag", dest="provider_tag")
    p.add_argument("--mentions")
    p.add_argument("--threshold", type=float)
    p.add_argument("--thresholds", help="comma-separated curve thresholds")
    p.add_argument("--min-country-examples", dest="min_country_examples", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", help="report JSON to write")

    p = add("curve", cmd_curve, "write precision-coverage curve points as CSV")
    p.add_argument("--index")
    p.add_argument("--provider")
    p.add_argument("--provider-tag", dest="provider_tag")
    p.add_argument("--mentions")
    p.add_argument("--thresholds", help="comma-separated thresholds")
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", help="curve CSV to write")

    p = add("reverse-geocode", cmd_reverse_geocode, "nearest city for lat/lon points")
    p.add_argument("--database")
    p.add_argument("--points", help="one 'lat<TAB>lon' per line")
    p.add_argument("--out", help="TSV to write")

    p = add("split", cmd_split, "seeded train/test split of a mentions file")
    p.add_argument("--mentions")
    p.add_argument("--test-fraction", dest="test_fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--train-out", dest="train_out")
    p.add_argument("--test-out", dest="test_out")

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; report those as input errors.
        return 0 if exc.code in (None, 0) else 1
    try:
        return args.func(args)
    except (ValueError, OSError, ProviderError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
