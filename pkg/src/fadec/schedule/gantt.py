"""Deterministic SVG Gantt rendering of a simulated timeline.

Two lanes (PL above CPU), one bar per event, colored by stage; frames
alternate bar saturation so the pipeline structure is readable.  The
output is plain generated SVG text, byte-stable for identical inputs.
"""

from __future__ import annotations

from .profile import CPU, PL
from .simulate import Timeline

_PALETTE = (
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
    "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#86bcb6", "#d37295",
)

_LANE_Y = {PL: 40, CPU: 110}
_BAR_H = 50


def render_gantt(timeline: Timeline, width: int = 1000) -> str:
    events = timeline.events
    if not events:
        return "<svg xmlns='http://www.w3.org/2000/svg' width='10' height='10'/>"
    span = max(e.end for e in events)
    scale = (width - 120) / span if span else 1.0
    order = timeline.profile.stage_order()
    height = 200 + 14 * ((len(order) + 3) // 4)
    parts = [
        f"<svg xmlns='http://www.w3.org/2000/svg' width='{width}' "
        f"height='{height}' font-family='monospace' font-size='11'>",
        "<rect width='100%' height='100%' fill='white'/>",
        f"<text x='10' y='{_LANE_Y[PL] + 30}'>PL</text>",
        f"<text x='10' y='{_LANE_Y[CPU] + 30}'>CPU</text>",
    ]
    for e in events:
        x = 60 + e.start * scale
        w = max((e.end - e.start) * scale, 1.0)
        y = _LANE_Y[e.resource]
        color = _PALETTE[order[e.stage] % len(_PALETTE)]
        opacity = "1.0" if e.frame % 2 == 0 else "0.55"
        parts.append(
            f"<rect x='{x:.2f}' y='{y}' width='{w:.2f}' height='{_BAR_H}' "
            f"fill='{color}' fill-opacity='{opacity}' stroke='black' "
            f"stroke-width='0.5'><title>{e.stage} f{e.frame} "
            f"[{e.start}, {e.end}]</title></rect>")
    # legend
    for i, name in enumerate(sorted(order, key=order.get)):
        lx = 60 + (i % 4) * 220
        ly = 185 + (i // 4) * 14
        color = _PALETTE[order[name] % len(_PALETTE)]
        parts.append(f"<rect x='{lx}' y='{ly - 9}' width='10' height='10' "
                     f"fill='{color}'/>")
        parts.append(f"<text x='{lx + 14}' y='{ly}'>{name}</text>")
    parts.append(f"<text x='60' y='20'>makespan {timeline.makespan()} us, "
                 f"{timeline.frames} frames</text>")
    parts.append("</svg>")
    return "\n".join(parts)
