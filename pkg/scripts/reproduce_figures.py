"""Reproduce the x_r*-against-r figures for both built-in models.

Writes <out>/<kind>/figure_sigma_*.csv and figure.svg through the CLI.

    python scripts/reproduce_figures.py [out_dir]
"""
import os
import sys
import tempfile

from harvest_opt.cli import main

KINDS = ("verhulst_pearl", "logistic")


def reproduce(out_dir: str) -> int:
    status = 0
    for kind in KINDS:
        with tempfile.NamedTemporaryFile("w", suffix=".cfg", delete=False) as fh:
            fh.write(f"kind={kind}\nmu=0.1\ngamma=0.001\n")
        try:
            code = main(["reproduce-figures", "--config", fh.name, "--out", os.path.join(out_dir, kind)])
        finally:
            os.unlink(fh.name)
        print(f"{kind}: exit {code}")
        status = status or code
    return status


if __name__ == "__main__":
    sys.exit(reproduce(sys.argv[1] if len(sys.argv) > 1 else "figures"))
