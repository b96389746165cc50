"""Stage runners over an on-disk store, exports, text report and the run manifest.

Store layout (one directory, files named by stage and source)::

    events_{kind}.ndjson, ingest_{kind}.json        ingest
    labels.csv, tourist_{source}.ndjson, classify.json
    zones.geojson, zone_metrics.csv, aggregate.json
    table1_descriptive.csv, temporal_profile.csv     stats
    table2_regression.csv, residuals.csv             ols
    clusters.csv, table3_groups.csv, kmeans.json     kmeans
    moran_{source}.json, table4_moran.csv            moran
    lisa_{source}.csv                                lisa
    typology.csv, gradient.csv, zones_out.geojson    typology
    run_manifest.json                                run
"""

import csv
import hashlib
import json
import logging
import platform
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__, _backend
from . import classify as classify_mod
from . import ingest as ingest_mod
from . import metrics as metrics_mod
from . import modeling
from . import spatial_stats
from . import typology as typology_mod
from . import zones as zones_mod
from .errors import ConfigError, DataError, TourmapError
from .ingest import Source

log = logging.getLogger("tourmap")

LAYER_ORDER = (Source.PHOTO, Source.CHECKIN, Source.TWEET)
# (x, y): residuals show where y has more tourists than x predicts
OLS_PAIRS = ((Source.CHECKIN, Source.PHOTO), (Source.TWEET, Source.PHOTO),
             (Source.TWEET, Source.CHECKIN))


class Store:
    """A run directory. Event files written through the store are also kept
    in memory, so later stages of the same run skip re-parsing them."""

    def __init__(self, root, create=True):
        self.root = Path(root)
        self._events = {}
        if create:
            self.root.mkdir(parents=True, exist_ok=True)
        elif not self.root.is_dir():
            raise DataError(f"store {self.root} does not exist")

    def path(self, name):
        return self.root / name

    def exists(self, name):
        return self.path(name).is_file()

    def write_json(self, name, obj):
        with open(self.path(name), "w", encoding="utf-8", newline="\n") as fh:
            json.dump(obj, fh, indent=1, sort_keys=True, allow_nan=True)
            fh.write("\n")

    def read_json(self, name):
        if not self.exists(name):
            raise DataError(f"missing {name} in store {self.root}; run the earlier stage first")
        with open(self.path(name), encoding="utf-8") as fh:
            return json.load(fh)

    def write_events(self, name, records):
        ingest_mod.write_events(self.path(name), records)
        self._events[name] = list(records)

    def read_events(self, name, crs="projected"):
        if name in self._events:
            return list(self._events[name])
        records, report = ingest_mod.parse_events(self.path(name), Source.TWEET, crs)
        if report.rejected:
            raise DataError(f"{name}: {report.rejected} invalid records in store")
        return records


def _crs(store):
    for name in ("aggregate.json",) + tuple(f"ingest_{k.value}.json" for k in Source):
        if store.exists(name):
            return store.read_json(name)["crs"]
    return "projected"


# -- ingest / classify ------------------------------------------------------

def stage_ingest(store, kind, path, crs="geographic"):
    kind = Source(kind)
    records, report = ingest_mod.parse_events(path, kind, crs)
    store.write_events(f"events_{kind.value}.ndjson", records)
    summary = {"source": kind.value, "input": Path(path).name, "crs": str(crs),
               "lines": report.accepted + report.rejected, **report.to_dict()}
    store.write_json(f"ingest_{kind.value}.json", summary)
    log.info("ingest %s: %d accepted, %d rejected", kind.value, report.accepted, report.rejected)
    return summary


def stage_classify(store, threshold_days=7, checkin_pattern=None):
    crs = _crs(store)
    kinds = [k for k in (Source.PHOTO, Source.TWEET, Source.CHECKIN)
             if store.exists(f"events_{k.value}.ndjson")]
    if not kinds:
        raise DataError("no ingested events in store")
    events = {k: store.read_events(f"events_{k.value}.ndjson", crs) for k in kinds}
    labels = classify_mod.label_users([e for k in kinds for e in events[k]], threshold_days)
    classify_mod.write_labels(store.path("labels.csv"), labels)

    layers = {}
    summary = {"threshold_days": threshold_days, "kinds": {}}
    predicate = ingest_mod.checkin_predicate(checkin_pattern)
    for k in kinds:
        tourist = classify_mod.filter_tourist_events(events[k], labels)
        kind_users = {(e.user_id, e.source) for e in events[k]}
        n_tourist_users = sum(1 for lab in labels if (lab.user_id, lab.source) in kind_users
                              and lab.label is classify_mod.Label.TOURIST)
        info = {"events": len(events[k]), "tourist_events": len(tourist),
                "resident_events": len(events[k]) - len(tourist),
                "users": len(kind_users), "tourist_users": n_tourist_users}
        if k is Source.TWEET:
            tweets = [e for e in tourist if e.source is Source.TWEET]
            others = [e for e in tourist if e.source is not Source.TWEET]
            checkins, ordinary = ingest_mod.split_checkins(tweets, predicate)
            info["checkins"] = len(checkins)
            info["ordinary"] = len(ordinary)
            tourist = others + checkins + ordinary
        for e in tourist:
            layers.setdefault(e.source, []).append(e)
        if k is Source.TWEET:
            layers.setdefault(Source.CHECKIN, [])
            layers.setdefault(Source.TWEET, [])
        summary["kinds"][k.value] = info

    # a layer without tourist events has nothing to analyse; drop it
    present = [s for s in LAYER_ORDER if layers.get(s)]
    empty = [s.value for s in LAYER_ORDER if s in layers and not layers[s]]
    if empty:
        log.warning("no tourist events for %s; layer skipped", ", ".join(empty))
    if not present:
        raise DataError("no tourist events in any source")
    for s in present:
        store.write_events(f"tourist_{s.value}.ndjson", layers[s])
    summary["layers"] = {s.value: len(layers[s]) for s in present}
    summary["empty_layers"] = empty
    store.write_json("classify.json", summary)
    return summary


def tourist_layers(store, crs=None):
    crs = crs or _crs(store)
    layers = store.read_json("classify.json")["layers"]
    return {Source(s): store.read_events(f"tourist_{s}.ndjson", crs) for s in layers}


# -- aggregate / stats ------------------------------------------------------

def stage_aggregate(store, zones_path, crs="projected", rescale=True):
    zones = zones_mod.load_zones(zones_path, crs)
    with open(store.path("zones.geojson"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(zones_mod.zones_to_geojson(zones), fh, separators=(",", ":"))
    layers = tourist_layers(store, crs)
    sources = [s for s in LAYER_ORDER if s in layers]
    events = [e for s in sources for e in layers[s]]
    index = zones_mod.ZoneIndex(zones)
    assignments = zones_mod.assign_points(events, zones, index=index)
    zone_ids = [z.zone_id for z in zones]
    counts = metrics_mod.unique_tourist_counts(events, assignments, zone_ids, sources)
    dens = metrics_mod.density(counts, zones)
    rescaled = {s: metrics_mod.rescale(dens[s]) for s in sources} if rescale else None
    metrics_mod.write_zone_metrics(store.path("zone_metrics.csv"), zone_ids, counts, dens, rescaled)

    summary = {"crs": str(crs), "zones": len(zones), "zones_input": Path(zones_path).name,
               "rescale": bool(rescale), "layers": {}}
    offset = 0
    for s in sources:
        part = assignments[offset:offset + len(layers[s])]
        offset += len(layers[s])
        rep = zones_mod.drop_report(part)
        summary["layers"][s.value] = {"events": len(part), **rep,
                                      "zones_with_tourists": int((counts[s] > 0).sum()),
                                      "unique_tourists_total": int(counts[s].sum())}
    store.write_json("aggregate.json", summary)
    return summary


def load_zones_from_store(store):
    return zones_mod.load_zones(store.path("zones.geojson"), _crs(store))


def analysis_values(store):
    """Per-zone analysis variable per source: rescaled densities when enabled."""
    zone_ids, counts, dens, resc = metrics_mod.read_zone_metrics(store.path("zone_metrics.csv"))
    use_rescaled = store.read_json("aggregate.json")["rescale"] and resc is not None
    values = resc if use_rescaled else dens
    return zone_ids, {s: values[s] for s in LAYER_ORDER if s in values}


def stage_stats(store):
    zone_ids, counts, dens, resc = metrics_mod.read_zone_metrics(store.path("zone_metrics.csv"))
    blocks = {"density_per_ha": {s: metrics_mod.descriptive_stats(v) for s, v in dens.items()}}
    if resc is not None:
        blocks["rescaled_density"] = {s: metrics_mod.descriptive_stats(v) for s, v in resc.items()}
    metrics_mod.write_stats_table(store.path("table1_descriptive.csv"), blocks)
    layers = tourist_layers(store)
    profiles = metrics_mod.temporal_profile([e for s in layers for e in layers[s]], list(layers))
    metrics_mod.write_temporal(store.path("temporal_profile.csv"), profiles)
    return blocks


# -- ols / kmeans -----------------------------------------------------------

def stage_ols(store):
    zone_ids, values = analysis_values(store)
    rows, resid_cols = [], {}
    for x, y in OLS_PAIRS:
        if x not in values or y not in values:
            continue
        res = modeling.ols_bivariate(values[x], values[y], x.value, y.value)
        rows.append({"x_source": x.value, "y_source": y.value, "n": res.n, "slope": res.slope,
                     "intercept": res.intercept, "r2": res.r2, "adj_r2": res.adj_r2,
                     "p_value": res.p_value, "significant_01": int(res.p_value < 0.01)})
        resid_cols[f"stdres_{y.value}_{x.value}"] = res.std_residuals
    modeling.write_rows(store.path("table2_regression.csv"), rows)
    with open(store.path("residuals.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["zone_id"] + list(resid_cols))
        for k, zid in enumerate(zone_ids):
            w.writerow([zid] + [repr(float(v[k])) for v in resid_cols.values()])
    return rows


def stage_kmeans(store, k=6, seed=0, restarts=50, jobs=1):
    zone_ids, values = analysis_values(store)
    sources = list(values)
    pts = np.column_stack([values[s] for s in sources])
    model = modeling.kmeans(pts, k=k, seed=seed, restarts=restarts, jobs=jobs)
    with open(store.path("clusters.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["zone_id", "cluster_group"])
        w.writerows(zip(zone_ids, model.assignments.tolist()))
    rows = modeling.group_profiles(model, {s.value: values[s] for s in sources})
    modeling.write_rows(store.path("table3_groups.csv"), rows)
    store.write_json("kmeans.json", {"k": k, "seed": seed, "restarts": restarts,
                                     "inertia": model.inertia, "n_iter": model.n_iter,
                                     "variables": [s.value for s in sources],
                                     "centers": model.centers.tolist()})
    return model


# -- moran / lisa / typology -----------------------------------------------

def _weights(store, threshold_m, row_standardize):
    zones = load_zones_from_store(store)
    return spatial_stats.build_weights(zones, threshold_m, row_standardize, _crs(store))


def _select(values, sources):
    if not sources:
        return list(values)
    sel = [Source(s) for s in sources]
    missing = [s.value for s in sel if s not in values]
    if missing:
        raise DataError(f"no aggregated layer for {missing}")
    return sel


MORAN_ROWS = (("Global Moran's Index", "I"), ("Expected Index", "expected"),
              ("Variance", "variance"), ("z-score", "z_score"), ("p-value", "p_value"),
              ("Permutation p-value", "perm_p"), ("Permutations", "permutations"))


def stage_moran(store, sources=None, permutations=999, threshold_m=500.0,
                row_standardize=False, seed=0):
    zone_ids, values = analysis_values(store)
    w = _weights(store, threshold_m, row_standardize)
    results = {}
    for s in _select(values, sources):
        res = spatial_stats.global_moran(values[s], w, permutations, seed)
        results[s] = res
        store.write_json(f"moran_{s.value}.json", {
            "source": s.value, "I": res.I, "expected": res.expected, "variance": res.variance,
            "z_score": res.z_score, "p_value": res.p_value, "perm_p": res.perm_p,
            "permutations": res.permutations, "seed": seed, "threshold_m": threshold_m,
            "row_standardized": row_standardize, "s0": w.s0})
    _write_table4(store)
    return results


def _write_table4(store):
    found = [s for s in LAYER_ORDER if store.exists(f"moran_{s.value}.json")]
    data = {s: store.read_json(f"moran_{s.value}.json") for s in found}
    with open(store.path("table4_moran.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["statistic"] + [s.value for s in found])
        for label, key in MORAN_ROWS:
            w.writerow([label] + [data[s][key] for s in found])


def stage_lisa(store, sources=None, permutations=999, threshold_m=500.0,
               row_standardize=False, alpha=0.05, seed=0, jobs=1):
    zone_ids, values = analysis_values(store)
    w = _weights(store, threshold_m, row_standardize)
    results = {}
    for s in _select(values, sources):
        res = spatial_stats.local_moran(values[s], w, permutations, alpha, seed, jobs, zone_ids)
        spatial_stats.write_lisa(store.path(f"lisa_{s.value}.csv"), zone_ids, res)
        results[s] = res
    return results


def stage_typology(store, alpha=0.05, center=None, ring_m=1000.0):
    found = {s: spatial_stats.read_lisa(store.path(f"lisa_{s.value}.csv"), alpha)
             for s in LAYER_ORDER if store.exists(f"lisa_{s.value}.csv")}
    if not found:
        raise DataError("no LISA results in store; run the lisa stage first")
    classes = typology_mod.combine_hh_map(found)
    typology_mod.write_typology(store.path("typology.csv"), classes)
    gradient = None
    if center is not None:
        zones = load_zones_from_store(store)
        gradient = typology_mod.specialization_gradient(classes, zones, center, ring_m, _crs(store))
        modeling.write_rows(store.path("gradient.csv"), gradient)
    export_geojson(store)
    return classes, gradient


# -- export / report --------------------------------------------------------

def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def export_geojson(store, name="zones_out.geojson"):
    """Zones with every per-zone result currently present in the store."""
    zones = load_zones_from_store(store)
    props = {z.zone_id: {} for z in zones}

    def merge(filename, convert):
        if store.exists(filename):
            for row in _read_csv(store.path(filename)):
                zid = row.pop("zone_id")
                props[zid].update(convert(row))

    def number(v):
        try:
            return int(v)
        except ValueError:
            return float(v)

    def numeric(row):
        return {k: number(v) for k, v in row.items()}

    merge("zone_metrics.csv", numeric)
    merge("residuals.csv", numeric)
    merge("clusters.csv", lambda r: {"cluster_group": int(r["cluster_group"])})
    for s in LAYER_ORDER:
        merge(f"lisa_{s.value}.csv", lambda r, s=s: {f"lisa_{s.value}": r["label"],
                                                    f"lisa_{s.value}_p": float(r["pseudo_p"]) if r["pseudo_p"] else None})
    merge("typology.csv", lambda r: {"typology": r["typology"]})
    with open(store.path(name), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(zones_mod.zones_to_geojson(zones, props), fh, separators=(",", ":"))


def _fmt(v, digits=2):
    if v is None or v == "":
        return "-"
    try:
        f = float(v)
    except (TypeError, ValueError):
        return str(v)
    if f.is_integer() and abs(f) < 1e12:
        return str(int(f))
    return f"{f:.{digits}f}"


def _table(header, rows):
    cols = [header] + rows
    widths = [max(len(str(r[i])) for r in cols) for i in range(len(header))]
    lines = ["  ".join(str(c).rjust(wd) if i else str(c).ljust(wd)
                       for i, (c, wd) in enumerate(zip(r, widths))) for r in cols]
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines)


def report(store, names=None):
    """Plain-text summary laid out like the descriptive, OLS, cluster and Moran tables."""
    names = names or {}
    out = []

    def disp(s):
        return names.get(s, s)

    if store.exists("table1_descriptive.csv"):
        with open(store.path("table1_descriptive.csv"), newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        block = []
        for r in rows:
            if r[0] in ("density_per_ha", "rescaled_density"):
                if block:
                    out.append(_table(*block) + "\n")
                title = "Tourist density per ha" if r[0] == "density_per_ha" else "Rescaled density (0-1000)"
                block = [[title] + [disp(s) for s in r[1:]], []]
            else:
                block[1].append([r[0]] + [_fmt(v) for v in r[1:]])
        if block:
            out.append(_table(*block) + "\n")
    if store.exists("table2_regression.csv"):
        rows = _read_csv(store.path("table2_regression.csv"))
        body = [[f"{disp(r['y_source'])} ~ {disp(r['x_source'])}", _fmt(r["adj_r2"]),
                 _fmt(r["slope"], 4), f"{float(r['p_value']):.4f}",
                 "**" if r["significant_01"] == "1" else ""] for r in rows]
        out.append("Adjusted r2 between sources (OLS)\n"
                   + _table(["pair", "adj r2", "slope", "p", "sig.01"], body) + "\n")
    if store.exists("table3_groups.csv"):
        rows = _read_csv(store.path("table3_groups.csv"))
        keys = [k for k in rows[0] if k not in ("group", "count")]
        head = ["group", "tracts"] + [f"{disp(k.rsplit('_', 1)[0])} {k.rsplit('_', 1)[1]}" for k in keys]
        body = [[r["group"], r["count"]] + [_fmt(r[k], 1) for k in keys] for r in rows]
        out.append("Cluster groups (means and sd)\n" + _table(head, body) + "\n")
    if store.exists("table4_moran.csv"):
        with open(store.path("table4_moran.csv"), newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        body = [[r[0]] + [_fmt(v, 4 if "p-value" in r[0] else 3) for v in r[1:]] for r in rows[1:]]
        out.append("Global Moran's I\n" + _table(["statistic"] + [disp(s) for s in rows[0][1:]], body) + "\n")
    if store.exists("typology.csv"):
        rows = _read_csv(store.path("typology.csv"))
        counts = {}
        for r in rows:
            counts[r["typology"]] = counts.get(r["typology"], 0) + 1
        body = [[lab, counts.get(lab, 0)] for lab in typology_mod.all_labels()]
        out.append("HH typology\n" + _table(["class", "zones"], body) + "\n")
    if store.exists("gradient.csv"):
        rows = _read_csv(store.path("gradient.csv"))
        body = [[r["ring"], _fmt(r["inner_m"]) + "-" + _fmt(r["outer_m"]), r["zones"],
                 _fmt(r["mean_membership"], 3), _fmt(r["mixed_share"], 3), _fmt(r["single_share"], 3)]
                for r in rows]
        out.append("Specialisation by distance ring\n"
                   + _table(["ring", "metres", "zones", "mean |m|", "mixed", "single"], body) + "\n")
    if not out:
        return "store holds no analysis outputs yet\n"
    return "\n".join(out)


# -- full run ---------------------------------------------------------------

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def run_pipeline(cfg):
    """Run every stage for ``cfg`` and write ``run_manifest.json``.

    On a stage failure the manifest is written with ``complete: false`` and
    the failing stage, and the error is re-raised with the stage named.
    """
    cfg.validate()
    store = Store(cfg.out)
    inputs = {"zones": _sha256(cfg.zones)}
    inputs.update({s.value: _sha256(p) for s, p in cfg.sources().items()})
    config_hash = cfg.hash(inputs)
    stages = []
    manifest = {"tool": "tourmap", "version": __version__, "python": platform.python_version(),
                "numpy": np.__version__, "scipy": scipy.__version__, "seed": cfg.seed,
                "config": cfg.canonical(), "config_hash": config_hash, "inputs": inputs,
                "stages": stages, "complete": False, "failed_stage": None,
                "backend": _backend.BACKEND, "jobs": cfg.jobs}

    def step(name, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            result = fn(*args, **kwargs)
        except TourmapError as exc:
            stages.append({"name": name, "status": "failed", "error": str(exc)})
            manifest["failed_stage"] = name
            _finish(store, manifest)
            raise type(exc)(f"stage {name}: {exc}") from exc
        log.info("stage %s done in %.2fs", name, time.perf_counter() - t0)
        return result

    counts = {}
    for kind, path in cfg.sources().items():
        counts[f"ingest_{kind.value}"] = step(f"ingest:{kind.value}", stage_ingest, store, kind,
                                              path, cfg.crs)
        stages.append({"name": f"ingest:{kind.value}", "status": "ok",
                       "counts": {k: counts[f"ingest_{kind.value}"][k]
                                  for k in ("lines", "accepted", "rejected")}})
    cls = step("classify", stage_classify, store, cfg.threshold_days, cfg.checkin_pattern)
    stages.append({"name": "classify", "status": "ok", "counts": cls})
    agg = step("aggregate", stage_aggregate, store, cfg.zones, cfg.crs, cfg.rescale)
    stages.append({"name": "aggregate", "status": "ok", "counts": agg["layers"]})
    step("stats", stage_stats, store)
    stages.append({"name": "stats", "status": "ok"})
    ols = step("ols", stage_ols, store)
    stages.append({"name": "ols", "status": "ok", "counts": {"pairs": len(ols)}})
    km = step("kmeans", stage_kmeans, store, cfg.k, cfg.seed, cfg.restarts, cfg.jobs)
    stages.append({"name": "kmeans", "status": "ok",
                   "counts": {"groups": km.k, "zones": int(km.assignments.size)}})
    step("moran", stage_moran, store, None, cfg.permutations, cfg.threshold_m,
         cfg.row_standardize, cfg.seed)
    stages.append({"name": "moran", "status": "ok"})
    lisa = step("lisa", stage_lisa, store, None, cfg.permutations, cfg.threshold_m,
                cfg.row_standardize, cfg.alpha, cfg.seed, cfg.jobs)
    stages.append({"name": "lisa", "status": "ok", "counts": {
        s.value: {lab: r.labels().count(lab) for lab in ("HH", "LL", "HL", "LH", "NS", "isolated")}
        for s, r in lisa.items()}})
    classes, gradient = step("typology", stage_typology, store, cfg.alpha, cfg.center, cfg.ring_m)
    tcounts = {lab: sum(c.class_label == lab for c in classes) for lab in typology_mod.all_labels()}
    stages.append({"name": "typology", "status": "ok",
                   "counts": {"classes": tcounts, "gradient": "written" if gradient is not None
                              else "skipped: no center configured"}})
    manifest["complete"] = True
    return _finish(store, manifest)


def _finish(store, manifest):
    outputs = {p.name: _sha256(p) for p in sorted(store.root.iterdir())
               if p.is_file() and p.name != "run_manifest.json"}
    manifest["outputs"] = outputs
    hashed = {k: manifest[k] for k in ("config_hash", "stages", "complete", "failed_stage", "outputs")}
    manifest["content_hash"] = hashlib.sha256(json.dumps(hashed, sort_keys=True).encode()).hexdigest()
    store.write_json("run_manifest.json", manifest)
    return manifest


def check_conservation(manifest):
    """Per ingested kind: lines == tourist events + resident events + rejected."""
    by_name = {s["name"]: s for s in manifest["stages"]}
    kinds = by_name.get("classify", {}).get("counts", {}).get("kinds", {})
    out = {}
    for kind, info in kinds.items():
        ing = by_name[f"ingest:{kind}"]["counts"]
        out[kind] = ing["lines"] == info["tourist_events"] + info["resident_events"] + ing["rejected"]
    return out


__all__ = ["Store", "run_pipeline", "report", "export_geojson", "check_conservation",
           "ConfigError"]
