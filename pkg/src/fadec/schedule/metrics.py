"""Timeline metrics: latency hiding, handoff overhead share, speedup."""

from __future__ import annotations

from dataclasses import replace

from ..errors import QueryError
from .profile import CPU, PL, ExternModel, ScheduleProfile
from .simulate import Timeline, simulate_schedule


def _merge(intervals: list[tuple[int, int]]) -> list[tuple[int, int]]:
    out: list[tuple[int, int]] = []
    for s, e in sorted(intervals):
        if out and s <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], e))
        else:
            out.append((s, e))
    return out


def _overlap(a: list[tuple[int, int]], b: list[tuple[int, int]]) -> int:
    total = 0
    for s1, e1 in a:
        for s2, e2 in b:
            total += max(0, min(e1, e2) - max(s1, s2))
    return total


def overlap_hidden_fraction(timeline: Timeline, stage, frame: int | None = None) -> float:
    """Fraction of the stage's busy time overlapped by the other resource's
    busy time within the same frame.  ``stage`` may be one name or a
    sequence of names treated as one unit (e.g. both fusion stages)."""
    names = (stage,) if isinstance(stage, str) else tuple(stage)
    if frame is None:
        frame = timeline.steady_frame()
    frame_events = timeline.events_of_frame(frame)
    mine = [e for e in frame_events if e.stage in names]
    if not mine:
        raise QueryError(f"stage(s) {names} absent from frame {frame}")
    resources = {e.resource for e in mine}
    if len(resources) != 1:
        raise QueryError(f"stage(s) {names} span both resources")
    other = PL if resources == {CPU} else CPU
    other_busy = _merge([(e.start, e.end) for e in frame_events
                         if e.resource == other])
    busy = _merge([(e.start, e.end) for e in mine])
    total = sum(e - s for s, e in busy)
    if total == 0:
        return 0.0
    return _overlap(busy, other_busy) / total


def extern_overhead_share(timeline: Timeline, frame: int | None = None) -> float:
    """Charged handoff overhead divided by the steady-state frame makespan."""
    if frame is None:
        frame = timeline.steady_frame()
    span = timeline.frame_makespan(frame)
    if span == 0:
        return 0.0
    return timeline.overhead_total_us / span


def serialized_profile(profile: ScheduleProfile) -> ScheduleProfile:
    """The same stages all placed on the CPU with no handoffs."""
    stages = [replace(s, placement=CPU) for s in profile.stages]
    return ScheduleProfile(stages=stages, extern=ExternModel(0, ()))


def speedup_vs_serial(timeline: Timeline) -> float:
    """Total-makespan ratio of the serial placement over this schedule."""
    serial = simulate_schedule(serialized_profile(timeline.profile),
                               frames=timeline.frames)
    if timeline.makespan() == 0:
        return 1.0
    return serial.makespan() / timeline.makespan()


def hidden_fractions(timeline: Timeline) -> dict[str, float]:
    """Per-stage hidden fraction on the steady-state frame."""
    return {s.name: overlap_hidden_fraction(timeline, s.name)
            for s in timeline.profile.stages}
