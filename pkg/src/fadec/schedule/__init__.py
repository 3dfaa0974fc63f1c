"""Deterministic PL/CPU co-design schedule simulation."""

from .gantt import render_gantt
from .metrics import (
    extern_overhead_share,
    hidden_fractions,
    overlap_hidden_fraction,
    serialized_profile,
    speedup_vs_serial,
)
from .profile import (
    CPU,
    PL,
    ExternModel,
    ScheduleProfile,
    StageProfile,
    load_profile,
    reference_profile,
    save_profile,
)
from .simulate import Event, Timeline, build_dependency_graph, simulate_schedule

__all__ = [
    "CPU",
    "Event",
    "ExternModel",
    "PL",
    "ScheduleProfile",
    "StageProfile",
    "Timeline",
    "build_dependency_graph",
    "extern_overhead_share",
    "hidden_fractions",
    "load_profile",
    "overlap_hidden_fraction",
    "reference_profile",
    "render_gantt",
    "save_profile",
    "serialized_profile",
    "simulate_schedule",
    "speedup_vs_serial",
]
