"""Text feature-file format LYF1.

Layout:

    LYF1 <frames> <total_dim> <group=dim,...>
    #key=value              (optional metadata lines, any number)
    <dim whitespace-separated values per frame, 9 significant digits>

Values are quantized once at write time; read -> write reproduces a written
file byte for byte.
"""

from __future__ import annotations

import numpy as np

from .assemble import FeatureMatrix

_MAGIC = "LYF1"


class FeatureFileError(ValueError):
    pass


def format_layout(layout) -> str:
    return ",".join(f"{g}={d}" for g, d in layout)


def parse_layout(text: str) -> tuple[tuple[str, int], ...]:
    out = []
    for part in text.split(","):
        if "=" not in part:
            raise FeatureFileError(f"bad layout field {part!r}")
        g, d = part.split("=", 1)
        out.append((g, int(d)))
    return tuple(out)


def dumps_features(mat: FeatureMatrix) -> str:
    lines = [f"{_MAGIC} {mat.frames} {mat.total_dim} {format_layout(mat.layout)}"]
    for key in mat.meta:
        lines.append(f"#{key}={mat.meta[key]}")
    for row in mat.values:
        lines.append(" ".join(f"{v:.9g}" for v in row))
    return "\n".join(lines) + "\n"


def loads_features(text: str) -> FeatureMatrix:
    lines = text.splitlines()
    if not lines:
        raise FeatureFileError("empty feature file")
    head = lines[0].split(maxsplit=3)
    if len(head) != 4 or head[0] != _MAGIC:
        raise FeatureFileError(f"bad header line {lines[0]!r}")
    n_frames, total_dim = int(head[1]), int(head[2])
    layout = parse_layout(head[3])
    meta = {}
    row_start = 1
    while row_start < len(lines) and lines[row_start].startswith("#"):
        body = lines[row_start][1:]
        key, _, value = body.partition("=")
        meta[key] = value
        row_start += 1
    rows = lines[row_start:]
    if len(rows) != n_frames:
        raise FeatureFileError(f"expected {n_frames} rows, found {len(rows)}")
    values = np.empty((n_frames, total_dim))
    for i, row in enumerate(rows):
        fields = row.split()
        if len(fields) != total_dim:
            raise FeatureFileError(f"row {i} has {len(fields)} values, expected {total_dim}")
        values[i] = [float(f) for f in fields]
    return FeatureMatrix(layout, values, meta)


def write_features(path, mat: FeatureMatrix) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_features(mat))


def read_features(path) -> FeatureMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_features(fh.read())
