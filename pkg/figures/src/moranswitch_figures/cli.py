"""Render figures from FigureSpec JSON files.

Usage: moranswitch-figs SPEC.json [SPEC.json ...]

Each spec names a figure kind, its input artifacts, and the output image:

    {"kind": "heatmap", "inputs": {"table": "heatmap.csv"}, "output": "heatmap.png"}
"""

from __future__ import annotations

import sys
from typing import Optional, Sequence

from .render import render
from .schemas import FigureSpec, SchemaError


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(__doc__)
        return 0 if argv else 2
    status = 0
    for path in argv:
        try:
            spec = FigureSpec.from_json(path)
            render(spec)
            print(f"{path}: wrote {spec.output}")
        except (SchemaError, FileNotFoundError, ValueError) as exc:
            print(f"{path}: error: {exc}", file=sys.stderr)
            status = 1
    return status


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
