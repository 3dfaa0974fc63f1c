"""Aligned text rendering of the per-process operator census."""

from __future__ import annotations

from ..graph import PROCESSES, TABLE_ROWS

_ROW_LABELS = {
    "conv(1,1)": "Conv (1, 1)",
    "conv(3,1)": "Conv (3, 1)",
    "conv(3,2)": "Conv (3, 2)",
    "conv(5,1)": "Conv (5, 1)",
    "conv(5,2)": "Conv (5, 2)",
    "relu": "Activation (ReLU)",
    "sigmoid": "Activation (sigmoid)",
    "elu": "Activation (ELU)",
    "add": "Addition",
    "mul": "Multiplication",
    "concat": "Concatenation",
    "slice": "Slice",
    "layer_norm": "Layer Normalization",
    "upsample_nearest": "Upsampling (nearest)",
    "upsample_bilinear": "Upsampling (bilinear)",
    "grid_sampling": "Grid Sampling",
}


def census_table(instance_counts: dict[str, dict[str, int]]) -> str:
    """Operation-by-process count table, one row per operator kind."""
    label_w = max(len(v) for v in _ROW_LABELS.values())
    col_w = 6
    header = "Operation".ljust(label_w) + "".join(
        p.rjust(col_w) for p in PROCESSES)
    sep = "-" * len(header)
    lines = [header, sep]
    for row in TABLE_ROWS:
        cells = [instance_counts.get(p, {}).get(row, 0) for p in PROCESSES]
        lines.append(_ROW_LABELS[row].ljust(label_w)
                     + "".join(str(c).rjust(col_w) for c in cells))
    return "\n".join(lines)
