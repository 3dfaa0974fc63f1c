"""Memory-access-pattern taxonomy of the operator kinds.

Convolution and upsampling walk a sliding window with high data reuse;
elementwise arithmetic and concatenation/slicing stream memory at
bandwidth; layer norm needs two full passes (every element is touched
twice); grid sampling's accesses depend on the coordinates and are close
to random.  Activations are folded into the producing convolution, so
their access pattern is not considered separately.
"""

from __future__ import annotations

from ..errors import AnalysisError
from ..graph import (
    KIND_ADD,
    KIND_CONCAT,
    KIND_CONV,
    KIND_ELU,
    KIND_GRID_SAMPLING,
    KIND_LAYER_NORM,
    KIND_MUL,
    KIND_RELU,
    KIND_SIGMOID,
    KIND_SLICE,
    KIND_UPSAMPLE_BILINEAR,
    KIND_UPSAMPLE_NEAREST,
)

SLIDING_WINDOW = "sliding-window"
ELEMENT_WISE = "element-wise"
SEQUENTIAL = "sequential"
TWO_PASS = "two-pass"
IRREGULAR = "irregular"
FOLDED = "folded-into-conv"

_PATTERNS = {
    KIND_CONV: SLIDING_WINDOW,
    KIND_UPSAMPLE_NEAREST: SLIDING_WINDOW,
    KIND_UPSAMPLE_BILINEAR: SLIDING_WINDOW,
    KIND_ADD: ELEMENT_WISE,
    KIND_MUL: ELEMENT_WISE,
    KIND_CONCAT: SEQUENTIAL,
    KIND_SLICE: SEQUENTIAL,
    KIND_LAYER_NORM: TWO_PASS,
    KIND_GRID_SAMPLING: IRREGULAR,
    KIND_RELU: FOLDED,
    KIND_SIGMOID: FOLDED,
    KIND_ELU: FOLDED,
}


def classify_memory_pattern(kind: str) -> str:
    try:
        return _PATTERNS[kind]
    except KeyError:
        raise AnalysisError(f"unknown operator kind {kind!r}") from None
