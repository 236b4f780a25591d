"""Entry point: render figures and a page from artifact directories."""

import argparse
import os
import sys
from pathlib import Path

from . import figures
from .readers import FormatError, load_flow, load_scan, load_variations
from .render import render_page


def _parser():
    p = argparse.ArgumentParser(
        prog="lambda-lab report",
        description="render figures and an index page from run artifacts")
    p.add_argument("--flow", help="directory holding flow.csv")
    p.add_argument("--scan", help="directory holding scan-report.json")
    p.add_argument("--variations", help="directory holding variations.csv")
    p.add_argument("--out", required=True, help="output directory")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    if not (args.flow or args.scan or args.variations):
        print("nothing to render: pass --flow, --scan, or --variations",
              file=sys.stderr)
        return 2
    out = Path(args.out)
    os.makedirs(out, exist_ok=True)
    sections = []
    try:
        if args.flow:
            flow = load_flow(args.flow)
            names = [figures.fig_lambda(flow, out),
                     figures.fig_decay(flow, out),
                     figures.fig_monitors(flow, out)]
            pairs = sorted((flow["summary"] or {}).items())
            sections.append(("flow", names, pairs))
        if args.scan:
            scan = load_scan(args.scan)
            names = [figures.fig_scan(scan, out)]
            pairs = [(k, scan[k]) for k in
                     ("c_B", "c_C", "sample_count", "excluded_count", "seed")]
            sections.append(("scan", names, pairs))
        if args.variations:
            rows = load_variations(args.variations)
            names = [figures.fig_variations(rows, out)] if rows else []
            sections.append(("variations", names, [("rows", len(rows))]))
    except FormatError as exc:
        print(f"report input error: {exc}", file=sys.stderr)
        return 2
    (out / "index.html").write_text(render_page(sections))
    return 0


if __name__ == "__main__":
    sys.exit(main())
