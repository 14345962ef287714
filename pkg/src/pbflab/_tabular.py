"""Plain-text tabular output with a reproducible provenance header.

Floats are written with ``repr`` (shortest round-trip form) so that files
are byte-identical across runs of the same configuration and parse back to
the exact same values.
"""

from __future__ import annotations

import numpy as np

from . import __version__


def provenance_lines(provenance: dict | None) -> list[str]:
    """Header comment lines carrying version / config hash / seed."""
    info = {"version": __version__}
    if provenance:
        info.update(provenance)
    return [f"# {key}={info[key]}\n" for key in sorted(info)]


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_table(path, columns: list[str], rows, kind: str,
                provenance: dict | None = None) -> None:
    """Write rows (iterable of tuples) under a commented header."""
    with open(path, "w") as fh:
        fh.write(f"# pbflab {kind} v1\n")
        for line in provenance_lines(provenance):
            fh.write(line)
        fh.write("# columns: " + " ".join(columns) + "\n")
        for row in rows:
            fh.write(" ".join(format_value(v) for v in row) + "\n")


def read_table(path) -> tuple[dict, list[str], np.ndarray]:
    """Read a table written by :func:`write_table`.

    Returns (metadata, column names, data) where data is a 2-D float array
    (possibly empty).
    """
    meta: dict[str, str] = {}
    columns: list[str] = []
    data_rows: list[list[float]] = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("columns:"):
                    columns = body.split(":", 1)[1].split()
                elif "=" in body and " " not in body.split("=", 1)[0]:
                    key, _, val = body.partition("=")
                    meta[key] = val
                continue
            data_rows.append([float(tok) for tok in line.split()])
    if data_rows:
        data = np.asarray(data_rows, dtype=float)
    else:
        data = np.empty((0, len(columns)), dtype=float)
    return meta, columns, data
