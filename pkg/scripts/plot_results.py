"""Render figures from saved problin outputs.

    python scripts/plot_results.py solve record.json figs/
    python scripts/plot_results.py pde record.json figs/
    python scripts/plot_results.py calibration table.csv figs/
    python scripts/plot_results.py gp table.csv figs/
"""

import argparse
import csv
import json

from problin import plotting


def _rows(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k, v in r.items():
            try:
                r[k] = float(v)
            except ValueError:
                pass
    return rows


def main():
    p = argparse.ArgumentParser(description="render figures from problin outputs")
    p.add_argument("kind", choices=("solve", "pde", "calibration", "gp"))
    p.add_argument("path")
    p.add_argument("outdir")
    a = p.parse_args()
    if a.kind in ("solve", "pde"):
        with open(a.path) as fh:
            record = json.load(fh)
        paths = (plotting.plot_solve if a.kind == "solve" else plotting.plot_pde)(record, a.outdir)
    else:
        rows = _rows(a.path)
        paths = (plotting.plot_calibration if a.kind == "calibration" else plotting.plot_gp)(rows, a.outdir)
    for path in paths:
        print(path)


if __name__ == "__main__":
    main()
