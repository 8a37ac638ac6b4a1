"""Batch figure emission from wavefocus artifacts.

    wavefocus-plots ratio-curve       --report out/report.json  --out fig.png
    wavefocus-plots heatmap           --field out/snapshot.wfoc --out fig.png
    wavefocus-plots distance-contours --field out/distance_map.wfoc \
                                      --levels 0.1,0.2,0.3,0.4,0.5 --out fig.png

Inputs are never mutated; missing or corrupt inputs exit nonzero.
"""

from __future__ import annotations

import argparse
import sys

from .artifacts import ArtifactError
from .render import PlotSpec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="wavefocus-plots",
                                     description="figures from wavefocus artifacts")
    sub = parser.add_subparsers(dest="kind", required=True)

    p = sub.add_parser("ratio-curve", help="per-k norms and ratio from a report")
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("heatmap", help="2D field magnitude map")
    p.add_argument("--field", required=True, help=".wfoc or x,y,value .csv")
    p.add_argument("--out", required=True)

    p = sub.add_parser("distance-contours", help="travel-time contour map")
    p.add_argument("--field", required=True)
    p.add_argument("--levels", default=None,
                   help="comma-separated contour levels")
    p.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.kind == "ratio-curve":
            spec = PlotSpec(kind="ratio-curve", inputs=[args.report], output=args.out)
        elif args.kind == "heatmap":
            spec = PlotSpec(kind="heatmap", inputs=[args.field], output=args.out)
        else:
            levels = None
            if args.levels:
                levels = [float(v) for v in args.levels.split(",")]
            spec = PlotSpec(kind="distance-contours", inputs=[args.field],
                            output=args.out, levels=levels)
        render(spec)
        return 0
    except ArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
