"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py --grid 50 --permutations 999 --points 200000

Both backends are run on identical inputs and their outputs are checked for
equality before timings are reported.
"""

import argparse
import json
import time

import numpy as np

from tourmap import _backend
from tourmap.spatial_stats import build_weights_from_points, local_moran
from tourmap.zones import ZoneIndex, zones_from_geojson


def grid_zones(side, cell=200.0):
    feats = []
    for r in range(side):
        for c in range(side):
            x0, y0 = c * cell, r * cell
            ring = [[x0, y0], [x0 + cell, y0], [x0 + cell, y0 + cell], [x0, y0 + cell], [x0, y0]]
            feats.append({"type": "Feature", "properties": {"id": f"r{r:03d}c{c:03d}"},
                          "geometry": {"type": "Polygon", "coordinates": [ring]}})
    return zones_from_geojson({"type": "FeatureCollection", "features": feats})


def best_of(fn, repeats):
    times, out = [], None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=50, help="zones per side (default 50)")
    ap.add_argument("--permutations", type=int, default=999)
    ap.add_argument("--points", type=int, default=200_000, help="points for the spatial join")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--json", action="store_true", help="print results as JSON")
    args = ap.parse_args(argv)

    if not _backend.compiled_available():
        ap.error("compiled extension not built; run `pip install -e . --no-build-isolation`")

    rng = np.random.default_rng(args.seed)
    side = args.grid
    zones = grid_zones(side)
    pts = np.array([z.centroid for z in zones])
    w = build_weights_from_points(pts)
    values = rng.gamma(0.7, 3.0, len(zones))
    index = ZoneIndex(zones)
    px = rng.uniform(0, side * 200.0, args.points)
    py = rng.uniform(0, side * 200.0, args.points)

    rows = []
    for name, run in (
        ("lisa", lambda b: local_moran(values, w, permutations=args.permutations, seed=args.seed,
                                       backend=b).pseudo_p),
        ("point_in_polygon", lambda b: index.assign_xy(px, py, backend=b)),
    ):
        t_c, out_c = best_of(lambda: run("compiled"), args.repeats)
        t_p, out_p = best_of(lambda: run("python"), args.repeats)
        rows.append({"kernel": name, "compiled_s": t_c, "python_s": t_p,
                     "speedup": t_p / t_c if t_c else float("inf"),
                     "identical": bool(np.array_equal(out_c, out_p))})

    if args.json:
        print(json.dumps({"zones": len(zones), "permutations": args.permutations,
                          "points": args.points, "results": rows}, indent=2))
        return
    print(f"{len(zones)} zones, {args.permutations} permutations, {args.points} points, "
          f"best of {args.repeats}")
    print(f"{'kernel':<18}{'compiled s':>12}{'python s':>12}{'speedup':>10}  identical")
    for r in rows:
        print(f"{r['kernel']:<18}{r['compiled_s']:>12.3f}{r['python_s']:>12.3f}"
              f"{r['speedup']:>9.1f}x  {r['identical']}")


if __name__ == "__main__":
    main()
