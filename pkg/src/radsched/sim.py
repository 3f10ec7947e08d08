"""Rolling-horizon clinic simulation.

Each working day the open decision list (yesterday's unfixed patients
plus today's arrivals) is rescheduled from scratch by the batch solver
against the minutes already booked.  Courses whose start falls inside
the notification window are then fixed into the booked grid and leave
the list; everyone else is re-decided tomorrow.  Reservation strategies
inject blocked minutes or synthetic future patients before the solve so
that today's bookings keep room for urgent arrivals still to come.
"""

from __future__ import annotations

import logging
import random
import statistics
import time
from dataclasses import dataclass, field, replace

from .calendars import Calendar
from .colgen import CgConfig, solve_daily
from .errors import InstanceError, RadschedError, SimulationError
from .model import (
    ConsecutiveLink,
    Instance,
    Patient,
    Priority,
    ScheduleColumn,
    column_footprint,
)
from .reservation import (
    STRATEGIES,
    PlaceholderSpec,
    StaticReservationPlan,
    materialize_placeholders,
    offline_lookahead,
)
from .validate import DEFAULT_WEIGHTS, CostBreakdown, CostWeights, column_breakdown

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimConfig:
    """Shape of one simulated run.

    ``horizon_days`` is how far ahead of the current day the daily
    scheduling window reaches; ``tail_days`` pads the calendar beyond it
    so late starts still have room to finish.  Urgent courses are always
    fixed immediately; anyone else is fixed once their start lies within
    ``notify_days`` working days of the decision day.
    """

    sim_days: int
    horizon_days: int = 65
    tail_days: int = 30
    notify_days: int = 5
    strategy: str = "none"
    static_plan: StaticReservationPlan | None = None
    placeholder_spec: PlaceholderSpec | None = None
    lookahead_days: int = 40

    def validate(self) -> None:
        if self.sim_days < 1:
            raise InstanceError("simulation needs at least one day")
        if self.horizon_days < 5 or self.tail_days < 0:
            raise InstanceError("scheduling horizon too short")
        if self.notify_days < 0:
            raise InstanceError("notification window cannot be negative")
        if self.strategy not in STRATEGIES:
            raise InstanceError(f"unknown strategy {self.strategy!r}")
        if self.strategy == "static" and self.static_plan is None:
            raise InstanceError("static strategy needs a reservation plan")
        if self.strategy == "dynamic" and self.placeholder_spec is None:
            raise InstanceError("dynamic strategy needs a placeholder roster")
        if self.strategy == "offline" and self.lookahead_days < 1:
            raise InstanceError("offline strategy needs a positive lookahead")


@dataclass(frozen=True)
class ArrivalStream:
    """Future patients in arrival order, plus their follow-up links."""

    patients: tuple[Patient, ...]
    links: tuple[ConsecutiveLink, ...] = ()

    def validate(self, base: Instance) -> None:
        seen: dict[str, Patient] = {}
        previous = 0
        for pat in self.patients:
            if pat.id in seen:
                raise InstanceError(f"duplicate arrival id {pat.id}")
            if pat.arrival_day < previous:
                raise InstanceError("arrivals must be ordered by day")
            if pat.protocol_id not in base.protocols:
                raise InstanceError(
                    f"arrival {pat.id}: unknown protocol {pat.protocol_id}"
                )
            seen[pat.id] = pat
            previous = pat.arrival_day
        for link in self.links:
            for pid in (link.primary, link.secondary):
                if pid not in seen:
                    raise InstanceError(f"link references unknown arrival {pid}")
            if seen[link.primary].arrival_day != seen[link.secondary].arrival_day:
                # both-or-neither fixing needs the pair on the same list
                raise InstanceError(
                    f"linked courses {link.primary}/{link.secondary} must arrive together"
                )

    def on(self, day: int) -> tuple[Patient, ...]:
        return tuple(p for p in self.patients if p.arrival_day == day)

    def after(self, day: int) -> tuple[Patient, ...]:
        return tuple(p for p in self.patients if p.arrival_day > day)


@dataclass(frozen=True)
class Booking:
    """One fixed course: the ledger row the clinic would act on."""

    patient_id: str
    protocol_id: str
    priority: str
    num_fractions: int
    booked_on_day: int
    column: ScheduleColumn
    waiting_days: int
    breakdown: CostBreakdown


@dataclass
class SimMetrics:
    """Outcome of one simulated run.

    Wall-clock figures are excluded from equality so that two runs with
    the same seed compare equal even though their timings differ.
    """

    days_run: int
    strategy: str
    bookings: tuple[Booking, ...]
    unresolved_backlog: tuple[str, ...]
    timeout_days: int
    solve_seconds: list[float] = field(default_factory=list, compare=False)

    def waits_by_priority(self) -> dict[str, list[int]]:
        out: dict[str, list[int]] = {}
        for booking in self.bookings:
            out.setdefault(booking.priority, []).append(booking.waiting_days)
        return out

    def mean_wait(self, priority: str) -> float | None:
        waits = self.waits_by_priority().get(priority)
        if not waits:
            return None
        return sum(waits) / len(waits)

    def median_wait(self, priority: str) -> float | None:
        waits = self.waits_by_priority().get(priority)
        if not waits:
            return None
        return float(statistics.median(waits))


def run_simulation(
    base: Instance,
    stream: ArrivalStream,
    config: SimConfig,
    cg_config: CgConfig = CgConfig(),
    weights: CostWeights = DEFAULT_WEIGHTS,
) -> SimMetrics:
    """Run the day loop and return the booking ledger plus summary counters.

    ``base`` supplies the clinic itself (machines, windows, protocols)
    and any minutes already booked before day one; its patient list is
    ignored.  The run is deterministic for a fixed configuration and
    seed as long as the solve budget never interrupts a day.
    """
    config.validate()
    stream.validate(base)

    fixed_grid = base.occupancy.copy()
    expected = dict(base.occupancy.as_dict())
    backlog: dict[str, Patient] = {}
    originals = {p.id: p for p in stream.patients}
    pair_of: dict[str, str] = {}
    for link in stream.links:
        pair_of[link.primary] = link.secondary
        pair_of[link.secondary] = link.primary
    already_fixed: set[str] = set()
    bookings: list[Booking] = []
    timeout_days = 0
    solve_seconds: list[float] = []

    for today in range(1, config.sim_days + 1):
        for pat in stream.on(today):
            if pat.id in already_fixed or pat.id in backlog:
                raise SimulationError(
                    f"day {today}: arrival {pat.id} is already pending", day=today
                )
            backlog[pat.id] = pat
        if not backlog:
            continue

        calendar = Calendar(num_days=today + config.horizon_days + config.tail_days)
        day_patients: dict[str, Patient] = {}
        for pid in sorted(backlog):
            # re-decided from scratch, but nothing may start before tomorrow
            day_patients[pid] = replace(backlog[pid], release_day=today + 1)

        protocols = None
        if config.strategy == "dynamic":
            rng = random.Random(cg_config.seed + 7919 * today)
            spec = config.placeholder_spec
            for ghost in materialize_placeholders(spec, today, calendar, rng):
                day_patients[ghost.id] = ghost
            protocols = dict(base.protocols)
            protocols.update(spec.protocols())
        elif config.strategy == "offline":
            ghosts = offline_lookahead(
                stream.after(today), today, config.lookahead_days, calendar
            )
            for ghost in ghosts:
                day_patients[ghost.id] = ghost

        day_links = [
            link
            for link in stream.links
            if link.primary in day_patients and link.secondary in day_patients
        ]
        if config.strategy == "offline":
            day_links.extend(
                ConsecutiveLink("oracle:" + link.primary, "oracle:" + link.secondary)
                for link in stream.links
                if "oracle:" + link.primary in day_patients
                and "oracle:" + link.secondary in day_patients
            )

        inst = base.with_patients(
            day_patients,
            tuple(day_links),
            occupancy=fixed_grid.copy(),
            calendar=calendar,
            protocols=protocols,
        )
        blocked = None
        if config.strategy == "static":
            blocked = config.static_plan.blocked_minutes(inst)

        started = time.monotonic()
        try:
            result = solve_daily(inst, cg_config, blocked=blocked, weights=weights)
        except RadschedError as exc:
            raise SimulationError(
                f"day {today}: batch solve failed with "
                f"{len(backlog)} open patients: {exc}",
                day=today,
            ) from exc
        solve_seconds.append(time.monotonic() - started)
        if result.report.timed_out or result.status != "optimal":
            timeout_days += 1

        # decide who gets fixed; linked pairs move both-or-neither
        to_fix: list[str] = []
        handled: set[str] = set()
        for pid in sorted(backlog):
            if pid in handled:
                continue
            unit = [pid]
            partner = pair_of.get(pid)
            if partner is not None:
                if partner not in backlog:
                    raise SimulationError(
                        f"day {today}: link partner {partner} of {pid} "
                        "left the list alone",
                        day=today,
                    )
                unit.append(partner)
            handled.update(unit)
            urgent = any(
                base.protocols[backlog[member].protocol_id].priority is Priority.A
                for member in unit
            )
            first_start = min(result.selection[member].start_day for member in unit)
            if urgent or first_start <= today + config.notify_days:
                to_fix.extend(unit)

        for pid in to_fix:
            original = originals[pid]
            column = result.selection[pid]
            footprint = column_footprint(column, original)
            fixed_grid.add_footprint(footprint)
            for cell, minutes in footprint.items():
                expected[cell] = expected.get(cell, 0) + minutes
            bookings.append(
                Booking(
                    patient_id=pid,
                    protocol_id=original.protocol_id,
                    priority=base.protocols[original.protocol_id].priority.name,
                    num_fractions=original.num_fractions,
                    booked_on_day=today,
                    column=column,
                    waiting_days=column.start_day - original.earliest_start,
                    breakdown=column_breakdown(column, day_patients[pid], inst),
                )
            )
            already_fixed.add(pid)
            del backlog[pid]

        if fixed_grid.as_dict() != expected:
            raise SimulationError(
                f"day {today}: booked-minutes ledger drifted from the bookings",
                day=today,
            )
        log.info(
            "day %d: %d open, %d fixed, %d carried over",
            today,
            len(handled),
            len(to_fix),
            len(backlog),
        )

    return SimMetrics(
        days_run=config.sim_days,
        strategy=config.strategy,
        bookings=tuple(bookings),
        unresolved_backlog=tuple(sorted(backlog)),
        timeout_days=timeout_days,
        solve_seconds=solve_seconds,
    )
