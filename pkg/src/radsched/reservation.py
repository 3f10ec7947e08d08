"""Capacity reservation strategies for uncertain urgent arrivals.

Four ways to prepare a daily instance before solving it:

* ``none``: solve what is actually there.
* ``static``: block a share of every machine's window minutes against
  lower-priority bookings; urgent courses still see the true loads.
* ``dynamic``: inject dummy urgent patients for the demand expected over
  the coming weeks; they compete for capacity inside the optimization
  and are thrown away after each day, so the reservation can always be
  traded against a real patient.
* ``offline``: inject the actual future arrivals instead of dummies; a
  hindsight bound for benchmarking, not a deployable policy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .calendars import Calendar
from .errors import InstanceError
from .model import Instance, Patient, Priority, Protocol, StartDayRule, TreatmentKind

log = logging.getLogger(__name__)

Cell = tuple[str, int, int]

STRATEGIES = ("none", "static", "dynamic", "offline")


def shadow_instance(instance: Instance, blocked: Mapping[Cell, int] | None) -> Instance:
    """Instance variant whose base load includes reserved minutes.

    Lower-priority subproblems and the heuristic must not plan into
    reserved capacity, but the master keeps the true cell loads; this
    shadow feeds only the former.  Reservations are clamped to the room
    actually left in each cell.
    """
    if not blocked:
        return instance
    grid = instance.occupancy.copy()
    for (m, d, w), extra in sorted(blocked.items()):
        if extra <= 0:
            continue
        room = instance.windows.length(w) - grid.minutes(m, d, w)
        if room <= 0:
            log.debug("reservation clamped to zero in full cell (%s,%d,%d)", m, d, w)
            continue
        if extra > room:
            log.debug(
                "reservation %d clamped to %d residual minutes in (%s,%d,%d)",
                extra, room, m, d, w,
            )
        grid.add(m, d, w, min(int(extra), room))
    return instance.with_patients(instance.patients, instance.links, occupancy=grid)


@dataclass(frozen=True)
class StaticReservationPlan:
    """Per-machine share of every window kept free for urgent arrivals."""

    fraction_of: Mapping[str, float]

    def validate(self) -> None:
        for m, f in self.fraction_of.items():
            if not 0.0 <= f <= 1.0:
                raise InstanceError(f"reserved fraction for {m} outside [0,1]: {f}")

    def blocked_minutes(self, instance: Instance) -> dict[Cell, int]:
        """Reserved minutes per cell, before residual clamping.

        Each machine's share applies uniformly to all four windows of
        every day it is open, proportional to the window length.
        """
        self.validate()
        out: dict[Cell, int] = {}
        cal = instance.calendar
        topo = instance.topology
        for m in topo.machines:
            frac = float(self.fraction_of.get(m, 0.0))
            if frac <= 0.0:
                continue
            closed = topo.unavailable.get(m, frozenset())
            for d in range(1, cal.num_days + 1):
                if d in closed:
                    continue
                for w in instance.windows.windows():
                    minutes = int(round(frac * instance.windows.length(w)))
                    if minutes > 0:
                        out[(m, d, w)] = minutes
        return out


@dataclass(frozen=True)
class PlaceholderRow:
    """One roster line of expected weekly urgent demand."""

    name: str
    per_week: int
    min_per_week: int
    dur_first: int
    dur_rest: int
    preferred_machines: frozenset[str]
    num_fractions: int
    min_days_from_ct: int

    def protocol(self) -> Protocol:
        return Protocol(
            id="ph-" + self.name,
            priority=Priority.A,
            min_per_week=self.min_per_week,
            min_days_from_ct=self.min_days_from_ct,
            preferred_machines=self.preferred_machines,
            allowed_machines=frozenset(),
            start_rule=StartDayRule.ANY,
            kind=TreatmentKind.CONVENTIONAL,
        )


@dataclass(frozen=True)
class PlaceholderSpec:
    """Weekly dummy-patient roster plus how far ahead to project it."""

    rows: tuple[PlaceholderRow, ...]
    weeks_ahead: int = 8
    site_distribution: tuple[tuple[str, float], ...] = ()

    def validate(self) -> None:
        for row in self.rows:
            if row.per_week < 0:
                raise InstanceError(f"roster row {row.name}: negative count")
            if row.num_fractions < 1 or row.min_per_week < 1:
                raise InstanceError(f"roster row {row.name}: empty course")
        if self.weeks_ahead < 0:
            raise InstanceError("weeks_ahead negative")
        total = sum(p for _, p in self.site_distribution)
        if self.site_distribution and total > 1.0 + 1e-9:
            raise InstanceError("site distribution exceeds probability 1")

    @property
    def per_week_total(self) -> int:
        return sum(row.per_week for row in self.rows)

    def scaled(self, factor: float) -> "PlaceholderSpec":
        """Roster with every weekly count rescaled (rounded to integers)."""
        rows = tuple(
            PlaceholderRow(
                row.name,
                int(round(row.per_week * factor)),
                row.min_per_week,
                row.dur_first,
                row.dur_rest,
                row.preferred_machines,
                row.num_fractions,
                row.min_days_from_ct,
            )
            for row in self.rows
        )
        return PlaceholderSpec(rows, self.weeks_ahead, self.site_distribution)

    def protocols(self) -> dict[str, Protocol]:
        return {row.protocol().id: row.protocol() for row in self.rows}


def iridium_placeholder_spec(weeks_ahead: int = 8) -> PlaceholderSpec:
    """Default roster: 36 expected urgent starts per week on a ten-machine park."""
    m1_8 = frozenset({"M1", "M2", "M3", "M4", "M5", "M6", "M7", "M8"})
    return PlaceholderSpec(
        rows=(
            PlaceholderRow("urgent1", 19, 1, 24, 24, m1_8, 3, 0),
            PlaceholderRow("vmat1", 6, 5, 24, 12,
                           frozenset({"M2", "M3", "M5", "M6", "M10"}), 28, 11),
            PlaceholderRow("vmat2", 5, 4, 24, 12,
                           frozenset({"M1", "M2", "M3", "M5", "M6", "M7", "M8", "M10"}), 23, 10),
            PlaceholderRow("stx1", 3, 3, 40, 40, frozenset({"M9"}), 6, 5),
            PlaceholderRow("electron", 1, 3, 24, 12,
                           frozenset({"M1", "M4", "M5", "M6", "M8"}), 12, 5),
            PlaceholderRow("vmat3", 1, 3, 24, 12,
                           frozenset({"M1", "M4", "M5", "M6", "M8"}), 10, 4),
            PlaceholderRow("urgent2", 1, 1, 24, 24, frozenset({"M9"}), 1, 0),
        ),
        weeks_ahead=weeks_ahead,
    )


def materialize_placeholders(
    spec: PlaceholderSpec,
    current_day: int,
    calendar: Calendar,
    rng,
) -> list[Patient]:
    """Dummy urgent patients for the coming full weeks.

    One dummy per roster count per week, earliest start pinned to the
    Monday of its target week.  Recreated from scratch every simulated
    day; the ids encode (week, roster row, ordinal) so a fixed seed
    reproduces the same sequence.  ``rng`` only draws site preferences.
    """
    spec.validate()
    out: list[Patient] = []
    sites = [s for s, _ in spec.site_distribution]
    probs = [p for _, p in spec.site_distribution]
    current_week = (current_day - 1) // 5 + 1
    for week in range(current_week + 1, current_week + 1 + spec.weeks_ahead):
        monday = 5 * (week - 1) + 1
        if not calendar.contains(monday):
            break
        for row in spec.rows:
            if monday + row.num_fractions - 1 > calendar.num_days:
                continue  # course cannot fit before the horizon ends
            for k in range(row.per_week):
                site = None
                if sites:
                    pick = rng.random()
                    acc = 0.0
                    for s, p in zip(sites, probs):
                        acc += p
                        if pick < acc:
                            site = s
                            break
                out.append(
                    Patient(
                        id=f"ph:w{week}:{row.name}:{k}",
                        protocol_id="ph-" + row.name,
                        num_fractions=row.num_fractions,
                        dur_first=row.dur_first,
                        dur_rest=row.dur_rest,
                        arrival_day=current_day,
                        ct_day=current_day,
                        earliest_start=monday,
                        site_preference=site,
                        is_placeholder=True,
                    )
                )
    return out


def offline_lookahead(
    future: Iterable[Patient],
    current_day: int,
    horizon_days: int,
    calendar: Calendar,
) -> list[Patient]:
    """The actual upcoming arrivals, flagged as throwaway entities.

    Benchmark-only hindsight: each future patient inside the lookahead
    window joins today's instance so the solver can plan around it, but
    the placeholder flag keeps it out of bookings and metrics.
    """
    out: list[Patient] = []
    for pat in future:
        if not current_day < pat.arrival_day <= current_day + horizon_days:
            continue
        earliest = max(pat.earliest_start, pat.arrival_day)
        if earliest + pat.num_fractions - 1 > calendar.num_days:
            continue  # course cannot fit before the horizon ends
        out.append(
            Patient(
                id="oracle:" + pat.id,
                protocol_id=pat.protocol_id,
                num_fractions=pat.num_fractions,
                dur_first=pat.dur_first,
                dur_rest=pat.dur_rest,
                arrival_day=pat.arrival_day,
                ct_day=max(pat.ct_day, pat.arrival_day),
                earliest_start=earliest,
                release_day=pat.arrival_day,
                window_preference=pat.window_preference,
                site_preference=pat.site_preference,
                is_placeholder=True,
            )
        )
    return out
