"""Command-line entry point: ``tourmap <subcommand> [options]``.

Every subcommand accepts ``--config FILE``; options given on the command
line override values from the file. Exit codes: 0 success, 2 configuration
error, 3 data error, 4 numeric error.
"""

import argparse
import json
import logging
import shutil
import sys
from pathlib import Path

from . import __version__, pipeline
from . import config as config_mod
from . import synth
from . import zones as zones_mod
from .errors import ConfigError, TourmapError

# CLI option -> config key, for options shared with the config file
_CONFIG_KEYS = {
    "zones": "zones", "crs": "crs", "photo": "photo", "tweet": "tweet", "checkin": "checkin",
    "checkin_pattern": "checkin_pattern", "threshold_days": "threshold_days",
    "rescale": "rescale", "k": "k", "restarts": "restarts", "threshold_m": "threshold_m",
    "row_standardize": "row_standardize", "permutations": "permutations", "alpha": "alpha",
    "seed": "seed", "center": "center", "ring_m": "ring_m", "out": "out", "jobs": "jobs",
}


def _point(text):
    try:
        return config_mod.parse_point(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add(p, *names, **kw):
    kw.setdefault("default", None)
    p.add_argument(*names, **kw)


def _store_opt(p):
    _add(p, "--store", help="store directory (default: 'out' from the config)")


def _weights_opts(p):
    _add(p, "--source", action="append", choices=["photo", "checkin", "tweet"],
         help="layer to analyse (repeatable; default: all)")
    _add(p, "--permutations", type=int)
    _add(p, "--threshold-m", type=float, help="distance band in metres (default 500)")
    p.add_argument("--row-standardize", action="store_true", default=None)
    _add(p, "--seed", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="tourmap", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"tourmap {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    _add(common, "--config", help="key = value configuration file")
    _add(common, "--jobs", type=int, help="cap on parallel tasks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="parse an NDJSON event file into a store")
    _add(p, "--source", choices=["photo", "tweet", "checkin"], required=True)
    _add(p, "--crs", choices=["geographic", "projected"])
    _add(p, "--in", dest="infile", required=True)
    _add(p, "--out", help="store directory")

    p = sub.add_parser("classify", parents=[common], help="label tourists and residents")
    _add(p, "--threshold-days", type=int)
    _add(p, "--checkin-pattern", help="regex marking check-ins in tweet text")
    _add(p, "--in", dest="instore")
    _add(p, "--out")

    p = sub.add_parser("zones", parents=[common], help="validate and summarise a zones file")
    _add(p, "--in", dest="infile", required=True)
    _add(p, "--crs", choices=["geographic", "projected"])
    _add(p, "--out", help="write normalised GeoJSON with area_ha and centroids")

    p = sub.add_parser("aggregate", parents=[common], help="per-zone unique tourists and densities")
    _store_opt(p)
    _add(p, "--zones")
    _add(p, "--crs", choices=["geographic", "projected"])
    p.add_argument("--rescale", dest="rescale", action="store_true", default=None)
    p.add_argument("--no-rescale", dest="rescale", action="store_false")

    for name, text in (("stats", "descriptive statistics and hourly profiles"),
                       ("ols", "pairwise bivariate OLS"), ("report", "plain-text summary")):
        p = sub.add_parser(name, parents=[common], help=text)
        _store_opt(p)

    p = sub.add_parser("kmeans", parents=[common], help="K-means zone typology")
    _store_opt(p)
    _add(p, "--k", type=int)
    _add(p, "--restarts", type=int)
    _add(p, "--seed", type=int)

    p = sub.add_parser("moran", parents=[common], help="global Moran's I")
    _store_opt(p)
    _weights_opts(p)

    p = sub.add_parser("lisa", parents=[common], help="local Moran (LISA)")
    _store_opt(p)
    _weights_opts(p)
    _add(p, "--alpha", type=float)

    p = sub.add_parser("typology", parents=[common], help="fuse HH clusters into classes")
    _store_opt(p)
    _add(p, "--alpha", type=float)
    _add(p, "--center", type=_point, help="X,Y (or LON,LAT) of the reference centre")
    _add(p, "--ring-m", type=float)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic city")
    _add(p, "--scenario", required=True)
    _add(p, "--out", required=True)

    p = sub.add_parser("run", parents=[common], help="full pipeline from a config")
    for opt in ("--zones", "--photo", "--tweet", "--checkin", "--out", "--checkin-pattern"):
        _add(p, opt)
    _add(p, "--crs", choices=["geographic", "projected"])
    for opt in ("--threshold-days", "--k", "--restarts", "--permutations", "--seed"):
        _add(p, opt, type=int)
    for opt in ("--threshold-m", "--alpha", "--ring-m"):
        _add(p, opt, type=float)
    _add(p, "--center", type=_point)
    p.add_argument("--rescale", dest="rescale", action="store_true", default=None)
    p.add_argument("--no-rescale", dest="rescale", action="store_false")
    p.add_argument("--row-standardize", action="store_true", default=None)
    return parser


def _config(args):
    overrides = {key: getattr(args, opt) for opt, key in _CONFIG_KEYS.items()
                 if getattr(args, opt, None) is not None}
    if args.config:
        return config_mod.PipelineConfig.load(args.config, overrides)
    return config_mod.PipelineConfig.from_mapping(overrides)


def _store(args, cfg, attr="store", create=False):
    root = getattr(args, attr, None) or (cfg.out if args.config else None)
    if not root:
        raise ConfigError("no store directory given (--store or 'out' in --config)")
    return pipeline.Store(root, create=create)


def _dump(obj):
    print(json.dumps(obj, indent=1, sort_keys=True, default=str))


def _run(args):
    cmd = args.command
    if cmd == "synth":
        out = synth.generate_to(synth.load_scenario(args.scenario), args.out)
        print(f"wrote synthetic city to {out}")
        return
    cfg = _config(args)
    if cmd == "run":
        manifest = pipeline.run_pipeline(cfg)
        print(f"run complete: {cfg.out} (content hash {manifest['content_hash'][:16]})")
        return
    if cmd == "ingest":
        store = pipeline.Store(args.out or cfg.out)
        _dump(pipeline.stage_ingest(store, args.source, args.infile, cfg.crs))
    elif cmd == "classify":
        src = pipeline.Store(args.instore or cfg.out, create=False)
        store = pipeline.Store(args.out or src.root)
        if store.root.resolve() != src.root.resolve():
            for f in list(src.root.glob("events_*.ndjson")) + list(src.root.glob("ingest_*.json")):
                shutil.copy2(f, store.path(f.name))
        _dump(pipeline.stage_classify(store, cfg.threshold_days, cfg.checkin_pattern))
    elif cmd == "zones":
        zs = zones_mod.load_zones(args.infile, cfg.crs)
        if args.out:
            Path(args.out).write_text(json.dumps(zones_mod.zones_to_geojson(zs)), encoding="utf-8")
        _dump({"zones": len(zs), "total_area_ha": sum(z.area_ha for z in zs),
               "min_area_ha": min(z.area_ha for z in zs), "max_area_ha": max(z.area_ha for z in zs)})
    elif cmd == "aggregate":
        if not cfg.zones:
            raise ConfigError("aggregate needs --zones or 'zones' in --config")
        _dump(pipeline.stage_aggregate(_store(args, cfg), cfg.zones, cfg.crs, cfg.rescale))
    elif cmd == "stats":
        pipeline.stage_stats(_store(args, cfg))
        print("wrote table1_descriptive.csv and temporal_profile.csv")
    elif cmd == "ols":
        _dump(pipeline.stage_ols(_store(args, cfg)))
    elif cmd == "kmeans":
        model = pipeline.stage_kmeans(_store(args, cfg), cfg.k, cfg.seed, cfg.restarts, cfg.jobs)
        _dump({"k": model.k, "inertia": model.inertia, "n_iter": model.n_iter})
    elif cmd == "moran":
        res = pipeline.stage_moran(_store(args, cfg), args.source, cfg.permutations,
                                   cfg.threshold_m, cfg.row_standardize, cfg.seed)
        _dump({s.value: {"I": r.I, "z_score": r.z_score, "p_value": r.p_value, "perm_p": r.perm_p}
               for s, r in res.items()})
    elif cmd == "lisa":
        res = pipeline.stage_lisa(_store(args, cfg), args.source, cfg.permutations, cfg.threshold_m,
                                  cfg.row_standardize, cfg.alpha, cfg.seed, cfg.jobs)
        _dump({s.value: {lab: r.labels().count(lab) for lab in ("HH", "LL", "HL", "LH", "NS", "isolated")}
               for s, r in res.items()})
    elif cmd == "typology":
        classes, gradient = pipeline.stage_typology(_store(args, cfg), cfg.alpha, cfg.center, cfg.ring_m)
        counts = {}
        for c in classes:
            counts[c.class_label] = counts.get(c.class_label, 0) + 1
        _dump({"classes": counts, "gradient_rings": len(gradient) if gradient else 0})
    elif cmd == "report":
        names = cfg.names if args.config else {}
        sys.stdout.write(pipeline.report(_store(args, cfg), names))


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _run(args)
    except TourmapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
