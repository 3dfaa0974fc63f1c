"""Deterministic discrete-event simulation of the PL/CPU pipeline.

Validation builds the per-frame dependency DAG (plus cross-frame edges)
and enforces the mandatory structure: the fusion finalization needs the
same frame's shrunk feature, the recurrent cell needs the same frame's
corrected hidden state, and fusion preparation must not wait on the
feature shrinker.  Simulation is non-preemptive list scheduling on the
two resources; a stage starts when its resource is free and every
dependency end time (plus applicable handoff overhead) has passed, with
ties broken by (frame index, declared stage order).
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigError
from .profile import CPU, PL, ScheduleProfile, StageProfile

# mandatory same-frame edges (dst depends on src) when both stages exist
_MANDATORY_EDGES = (("FS", "CVF-final"), ("hidden-correction", "CL"))
# forbidden same-frame edge: fusion preparation needs only the pose
_FORBIDDEN_EDGES = (("FS", "CVF-prep"),)


@dataclass(frozen=True)
class Event:
    stage: str
    frame: int
    start: int
    end: int
    resource: str

    def to_json(self) -> dict:
        return {"stage": self.stage, "frame": self.frame, "start": self.start,
                "end": self.end, "resource": self.resource}


@dataclass
class Timeline:
    events: list[Event]
    frames: int
    overhead_total_us: int  # charged handoff overhead per frame
    profile: ScheduleProfile

    def events_of_frame(self, frame: int) -> list[Event]:
        return [e for e in self.events if e.frame == frame]

    def frame_makespan(self, frame: int) -> int:
        ev = self.events_of_frame(frame)
        return max(e.end for e in ev) - min(e.start for e in ev)

    def makespan(self) -> int:
        return max(e.end for e in self.events) if self.events else 0

    def steady_frame(self) -> int:
        return self.frames - 1

    def to_json(self) -> dict:
        return {
            "events": [e.to_json() for e in self.events],
            "frames": self.frames,
            "makespan_us": self.makespan(),
            "frame_makespan_us": self.frame_makespan(self.steady_frame()),
            "overhead_total_us": self.overhead_total_us,
        }


def _find_cycle(stages: list[StageProfile]) -> list[str] | None:
    """Cycle among same-frame dependency edges, if any."""
    names = {s.name for s in stages}
    adj = {s.name: [d for d, off in s.deps if off == 0 and d in names]
           for s in stages}
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {n: WHITE for n in names}
    stack: list[str] = []

    def dfs(n) -> list[str] | None:
        color[n] = GRAY
        stack.append(n)
        for m in adj[n]:
            if color[m] == GRAY:
                return stack[stack.index(m):] + [m]
            if color[m] == WHITE:
                found = dfs(m)
                if found:
                    return found
        stack.pop()
        color[n] = BLACK
        return None

    for n in sorted(names):
        if color[n] == WHITE:
            found = dfs(n)
            if found:
                return found
    return None


def build_dependency_graph(profile: ScheduleProfile) -> ScheduleProfile:
    """Validate the profile; returns it unchanged when well-formed."""
    names = [s.name for s in profile.stages]
    if len(set(names)) != len(names):
        raise ConfigError("stage names must be unique")
    known = set(names)
    for s in profile.stages:
        for dep, _ in s.deps:
            if dep not in known:
                raise ConfigError(f"{s.name}: unknown dependency {dep!r}")
    cycle = _find_cycle(profile.stages)
    if cycle:
        raise ConfigError("dependency cycle: " + " -> ".join(cycle))
    by_name = profile.by_name()
    for src, dst in _MANDATORY_EDGES:
        if src in known and dst in known:
            if (src, 0) not in by_name[dst].deps:
                raise ConfigError(
                    f"missing mandatory same-frame edge {dst} <- {src}")
    for src, dst in _FORBIDDEN_EDGES:
        if src in known and dst in known:
            if (src, 0) in by_name[dst].deps:
                raise ConfigError(
                    f"{dst} must not depend on same-frame {src}")
    for a, b in profile.extern.handoffs:
        if a not in known or b not in known:
            raise ConfigError(f"handoff ({a}, {b}) names an unknown stage")
    return profile


def simulate_schedule(profile: ScheduleProfile, frames: int = 4) -> Timeline:
    """List-schedule `frames` identical frames on the PL and CPU."""
    build_dependency_graph(profile)
    if frames < 1:
        raise ConfigError("need at least one frame")
    order = profile.stage_order()
    by_name = profile.by_name()
    extern = profile.extern

    end: dict[tuple[str, int], int] = {}
    resource_free = {PL: 0, CPU: 0}
    pending = [(s.name, f) for f in range(frames) for s in profile.stages]
    events: list[Event] = []

    def ready_time(stage: str, frame: int) -> int | None:
        t = 0
        for dep, off in by_name[stage].deps:
            dep_frame = frame - off
            if dep_frame < 0:
                continue  # no previous frame: the dependency is vacuous
            key = (dep, dep_frame)
            if key not in end:
                return None
            t = max(t, end[key] + extern.edge_overhead(dep, stage))
        return t

    while pending:
        best = None
        for stage, frame in pending:
            rt = ready_time(stage, frame)
            if rt is None:
                continue
            s = by_name[stage]
            start = max(rt, resource_free[s.placement])
            cand = (start, frame, order[stage])
            if best is None or cand < best[0]:
                best = (cand, stage, frame, s)
        if best is None:
            raise ConfigError("schedule deadlock: no runnable stage")
        (start, _, _), stage, frame, s = best
        events.append(Event(stage, frame, start, start + s.latency_us, s.placement))
        end[(stage, frame)] = start + s.latency_us
        resource_free[s.placement] = start + s.latency_us
        pending.remove((stage, frame))

    per_frame_overhead = sum(
        extern.edge_overhead(dep, s.name)
        for s in profile.stages for dep, _ in s.deps)
    events.sort(key=lambda e: (e.start, e.end, e.frame, order[e.stage]))
    return Timeline(events=events, frames=frames,
                    overhead_total_us=per_frame_overhead, profile=profile)
