"""Randomized construction of complete initial schedules.

Builds N full assignments of every patient to machine/day/window cells.
Each assignment round shares one temporary occupancy grid, so the N
schedules are individually capacity-feasible as a whole and double as
both a feasibility backstop and a warm start for the integer pass.
Columns collected along the way seed the master's pool.

Randomization spreads the pool: patient order inside each priority
band, machine order, and window order are all seeded draws.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .calendars import NUM_WINDOWS
from .errors import HeuristicError
from .master import ColumnPool
from .model import (
    Instance,
    OccupancyGrid,
    Patient,
    Priority,
    Protocol,
    ScheduleColumn,
    TreatmentKind,
)
from .validate import CostWeights, DEFAULT_WEIGHTS, check_column, column_cost

__all__ = ["HeuristicConfig", "HeuristicResult", "generate_initial"]

Cell = tuple[str, int, int]


@dataclass(frozen=True)
class HeuristicConfig:
    num_schedules: int = 50
    seed: int = 0
    random_patient_order_rate: float = 0.5
    random_machine_order_rate: float = 0.25
    nonpreferred_window_rate: float = 0.10

    def validate(self) -> None:
        if self.num_schedules < 1:
            raise HeuristicError("need at least one schedule round")
        for rate in (
            self.random_patient_order_rate,
            self.random_machine_order_rate,
            self.nonpreferred_window_rate,
        ):
            if not 0.0 <= rate <= 1.0:
                raise HeuristicError("branch rates live in [0, 1]")


@dataclass
class HeuristicResult:
    pool: ColumnPool
    schedules: list[dict[str, ScheduleColumn]]
    schedule_costs: list[int]

    def best_schedule(self) -> dict[str, ScheduleColumn]:
        k = min(range(len(self.schedules)), key=lambda i: self.schedule_costs[i])
        return self.schedules[k]


class _Round:
    """Shared state of one schedule-construction round."""

    def __init__(
        self,
        instance: Instance,
        base: OccupancyGrid,
        blocked: dict[Cell, int] | None,
        rng: random.Random,
        config: HeuristicConfig,
    ):
        self.instance = instance
        self.grid = base.copy()
        self.blocked = blocked or {}
        self.rng = rng
        self.config = config

    def room(self, patient: Patient, m: str, d: int, w: int, extra: dict[Cell, int]) -> int:
        protocol = self.instance.protocol_of(patient)
        cell = (m, d, w)
        held = self.grid.minutes(m, d, w) + extra.get(cell, 0)
        if protocol.priority is not Priority.A:
            held += self.blocked.get(cell, 0)
        return self.instance.windows.length(w) - held

    def commit(self, cells: dict[Cell, int]) -> None:
        for (m, d, w), minutes in cells.items():
            self.grid.add(m, d, w, minutes)


class _Course:
    """Tentative placement of one patient; nothing is shared until commit."""

    def __init__(self, patient: Patient, rnd: _Round, carried: dict[Cell, int]):
        self.patient = patient
        self.rnd = rnd
        self.carried = carried  # a linked partner's uncommitted cells
        self.booked: list[Cell] = []
        self.tentative: dict[Cell, int] = {}
        self.used_dw: set[tuple[int, int]] = set()
        self.double_weeks: set[int] = set()
        self.forced: dict[int, int] = {}

    def reset(self) -> None:
        self.booked.clear()
        self.tentative.clear()
        self.used_dw.clear()
        self.double_weeks.clear()
        self.forced.clear()

    def duration(self) -> int:
        return self.patient.dur_first if not self.booked else self.patient.dur_rest

    def fits(self, m: str, d: int, w: int) -> bool:
        if (d, w) in self.used_dw:
            return False
        overlay = dict(self.carried)
        for cell, minutes in self.tentative.items():
            overlay[cell] = overlay.get(cell, 0) + minutes
        return self.rnd.room(self.patient, m, d, w, overlay) >= self.duration()

    def book(self, m: str, d: int, w: int) -> None:
        cell = (m, d, w)
        self.tentative[cell] = self.tentative.get(cell, 0) + self.duration()
        self.booked.append(cell)
        self.used_dw.add((d, w))

    def last_day(self) -> int:
        return self.booked[-1][1]


def _window_order(patient: Patient, rng: random.Random, rate: float) -> list[int]:
    base = list(range(1, NUM_WINDOWS + 1))
    if patient.window_preference is not None:
        base = [patient.window_preference] + [
            w for w in base if w != patient.window_preference
        ]
    if rng.random() < rate:
        base = base[::-1]
    return base


def _machine_order(
    patient: Patient, protocol: Protocol, instance: Instance, rng: random.Random, rate: float
) -> list[str]:
    eligible = sorted(protocol.eligible_machines)
    if rng.random() < rate:
        order = list(eligible)
        rng.shuffle(order)
        return order
    preferred = sorted(protocol.preferred_machines)
    if patient.site_preference is not None:
        at_site = instance.site_machines(patient.site_preference)
        tiers = [
            [m for m in preferred if m in at_site],
            [m for m in eligible if m in at_site],
            preferred,
            eligible,
        ]
    else:
        tiers = [preferred, eligible]
    order: list[str] = []
    for tier in tiers:
        tier = list(tier)
        rng.shuffle(tier)
        for m in tier:
            if m not in order:
                order.append(m)
    return order


def _try_beam_matched(
    course: _Course, machine: str, day: int, windows: list[int]
) -> Cell | None:
    """A beam-matched partner may take over one fraction on a closed day."""
    inst = course.rnd.instance
    topo = inst.topology
    protocol = inst.protocol_of(course.patient)
    group = topo.beam_group_of(machine)
    for partner in sorted(group & protocol.eligible_machines):
        if partner == machine or topo.is_unavailable(partner, day):
            continue
        for w in windows:
            if course.fits(partner, day, w):
                return (partner, day, w)
    return None


def _handle_unavailable_conv(
    course: _Course, machine: str, day: int, windows: list[int]
) -> tuple[str, int] | None:
    """Closed day mid-course for a conventional patient.

    Returns ("resume", next_day) after repairing, or None when the day
    cannot be repaired and the course restarts.
    """
    inst = course.rnd.instance
    cal = inst.calendar
    topo = inst.topology
    protocol = inst.protocol_of(course.patient)
    group = topo.beam_group_of(machine)
    rng = course.rnd.rng
    last = course.last_day()

    def postpone_ok() -> bool:
        week = cal.week_of(day)
        open_days = sum(
            1 for d in cal.days_of_week(week) if not topo.is_unavailable(machine, d)
        )
        if open_days < protocol.min_per_week:
            return False
        if (day + 1) - last > 3:
            return False
        # skipping breaks the consecutive chain, allowed only in weeks
        # already disturbed by a closure
        return not inst.free_week_for_group(group, cal.week_of(last))

    if protocol.min_per_week < 5:
        if rng.random() < 0.5:
            cell = _try_beam_matched(course, machine, day, windows)
            if cell is not None:
                course.book(*cell)
                return ("resume", day + 1)
            return None
        return ("resume", day + 1) if postpone_ok() else None

    # daily courses: a partner machine first, then doubling up
    cell = _try_beam_matched(course, machine, day, windows)
    if cell is not None:
        course.book(*cell)
        return ("resume", day + 1)

    week = cal.week_of(day)
    if week not in course.double_weeks:
        nxt = day + 1
        if (
            cal.contains(nxt)
            and cal.week_of(nxt) == week
            and not topo.is_unavailable(machine, nxt)
            and not inst.free_week_for_group(group, cal.week_of(last))
            and course.fits(machine, nxt, 1)
        ):
            course.book(machine, nxt, 1)
            course.double_weeks.add(week)
            course.forced[nxt] = 4
            return ("resume", nxt)
        prev = day - 1
        if (
            len(course.booked) >= 2
            and course.booked[-1] == (machine, prev, 1)
            and cal.week_of(prev) == week
            and course.fits(machine, prev, 4)
        ):
            course.book(machine, prev, 4)
            course.double_weeks.add(week)
            return ("resume", day + 1)
    return None


def _place_conventional(
    course: _Course, machine: str, start_days: list[int]
) -> bool:
    patient = course.patient
    inst = course.rnd.instance
    cal = inst.calendar
    topo = inst.topology
    rng = course.rnd.rng
    cfg = course.rnd.config
    windows = _window_order(patient, rng, cfg.nonpreferred_window_rate)
    if not start_days:
        return False
    starts = set(start_days)
    last_start = max(starts)
    day = min(starts)
    while True:
        if len(course.booked) == patient.num_fractions:
            return True
        if day > cal.num_days:
            return False
        if not course.booked:
            if day not in starts:
                if day > last_start:
                    return False
                day += 1
                continue
            if topo.is_unavailable(machine, day):
                day += 1
                continue
        elif topo.is_unavailable(machine, day):
            out = _handle_unavailable_conv(course, machine, day, windows)
            if out is None:
                course.reset()
                day += 1
                continue
            _, day = out
            continue
        forced = course.forced.pop(day, None)
        if forced is not None:
            if course.fits(machine, day, forced):
                course.book(machine, day, forced)
                day += 1
                continue
            course.reset()
            day += 1
            continue
        placed = False
        for w in windows:
            if course.fits(machine, day, w):
                course.book(machine, day, w)
                placed = True
                break
        if placed:
            day += 1
            continue
        course.reset()
        day += 1


def _place_every_other_day(
    course: _Course, machine: str, start_days: list[int]
) -> bool:
    patient = course.patient
    inst = course.rnd.instance
    cal = inst.calendar
    topo = inst.topology
    rng = course.rnd.rng
    cfg = course.rnd.config
    windows = _window_order(patient, rng, cfg.nonpreferred_window_rate)
    for start in start_days:
        course.reset()
        if topo.is_unavailable(machine, start):
            continue
        placed_first = False
        for w in windows:
            if course.fits(machine, start, w):
                course.book(machine, start, w)
                placed_first = True
                break
        if not placed_first:
            continue
        while len(course.booked) < patient.num_fractions:
            last = course.last_day()
            candidates = ([last + 1] if cal.is_friday(last) else []) + [last + 2, last + 3]
            booked_one = False
            for cand in candidates:
                if not cal.contains(cand):
                    continue
                if not topo.is_unavailable(machine, cand):
                    for w in windows:
                        if course.fits(machine, cand, w):
                            course.book(machine, cand, w)
                            booked_one = True
                            break
                if booked_one:
                    break
                cell = _try_beam_matched(course, machine, cand, windows)
                if cell is not None and not topo.is_unavailable(cell[0], cand):
                    course.book(*cell)
                    booked_one = True
                    break
            if not booked_one:
                break
        if len(course.booked) == patient.num_fractions:
            return True
    course.reset()
    return False


def _place_five_per_week(
    course: _Course, machine: str, start_days: list[int]
) -> bool:
    patient = course.patient
    inst = course.rnd.instance
    cal = inst.calendar
    topo = inst.topology
    rng = course.rnd.rng
    cfg = course.rnd.config
    windows = _window_order(patient, rng, cfg.nonpreferred_window_rate)
    for monday in start_days:
        course.reset()
        if monday + patient.num_fractions - 1 > cal.num_days:
            break
        done = True
        for d in range(monday, monday + patient.num_fractions):
            booked_one = False
            if not topo.is_unavailable(machine, d):
                for w in windows:
                    if course.fits(machine, d, w):
                        course.book(machine, d, w)
                        booked_one = True
                        break
            if not booked_one:
                cell = _try_beam_matched(course, machine, d, windows)
                if cell is not None:
                    course.book(*cell)
                    booked_one = True
            if not booked_one:
                done = False
                break
        if done:
            return True
    course.reset()
    return False


def _place_tbi(course: _Course, machine: str, start_days: list[int]) -> bool:
    patient = course.patient
    inst = course.rnd.instance
    cal = inst.calendar
    topo = inst.topology
    for monday in start_days:
        course.reset()
        days = [monday, monday + 1, monday + 2]
        if days[-1] > cal.num_days:
            break
        ok = True
        for d in days:
            if topo.is_unavailable(machine, d):
                ok = False
                break
            for w in (1, 4):
                if course.fits(machine, d, w):
                    course.book(machine, d, w)
                else:
                    ok = False
                    break
            if not ok:
                break
        if ok and len(course.booked) == patient.num_fractions:
            return True
    course.reset()
    return False


_PLACERS = {
    TreatmentKind.CONVENTIONAL: _place_conventional,
    TreatmentKind.EVERY_OTHER_DAY: _place_every_other_day,
    TreatmentKind.FIVE_PER_WEEK: _place_five_per_week,
    TreatmentKind.TBI: _place_tbi,
}


def _place_patient(
    rnd: _Round,
    patient: Patient,
    start_floor: int,
    start_ceiling: int | None = None,
    carried: dict[Cell, int] | None = None,
) -> _Course | None:
    """One patient on the best machine the ordered scan reaches."""
    inst = rnd.instance
    protocol = inst.protocol_of(patient)
    start_days = [
        d
        for d in inst.allowed_start_days(patient)
        if d >= start_floor and (start_ceiling is None or d <= start_ceiling)
    ]
    if not start_days:
        return None
    machines = _machine_order(
        patient, protocol, inst, rnd.rng, rnd.config.random_machine_order_rate
    )
    placer = _PLACERS[protocol.kind]
    for machine in machines:
        floor = start_days[0]
        while True:
            days = [d for d in start_days if d >= floor]
            if not days:
                break
            course = _Course(patient, rnd, carried or {})
            if not placer(course, machine, days):
                break
            column = ScheduleColumn(patient.id, tuple(course.booked), 0)
            if not check_column(column, patient, inst):
                return course
            # construction guards missed a rule; push the start past the
            # offending course and rescan rather than emit the column
            floor = min(d for _, d, _ in course.booked) + 1
    return None


def _course_column(
    course: _Course, instance: Instance, weights: CostWeights
) -> ScheduleColumn:
    bare = ScheduleColumn(course.patient.id, tuple(course.booked), 0)
    cost = column_cost(bare, course.patient, instance, weights=weights)
    return ScheduleColumn(course.patient.id, tuple(course.booked), cost)


def _ordered_patients(
    instance: Instance, rng: random.Random, config: HeuristicConfig
) -> list[Patient]:
    bands: dict[Priority, list[Patient]] = {p: [] for p in Priority}
    for pid in sorted(instance.patients):
        patient = instance.patients[pid]
        bands[instance.protocol_of(patient).priority].append(patient)
    shuffle = rng.random() < config.random_patient_order_rate
    ordered: list[Patient] = []
    for prio in (Priority.A, Priority.B, Priority.C):
        band = bands[prio]
        if shuffle:
            rng.shuffle(band)
        else:
            band.sort(key=lambda p: (p.effective_earliest, p.id))
        ordered.extend(band)
    # a linked secondary is handled right after its primary; a pair is
    # only treated as a pair while both courses are still unscheduled
    secondary_of = {
        lk.primary: lk.secondary
        for lk in instance.links
        if lk.primary in instance.patients and lk.secondary in instance.patients
    }
    secondaries = set(secondary_of.values())
    final: list[Patient] = []
    for patient in ordered:
        if patient.id in secondaries:
            continue
        final.append(patient)
        follow = secondary_of.get(patient.id)
        if follow is not None:
            final.append(instance.patients[follow])
    return final


def generate_initial(
    instance: Instance,
    occupancy: OccupancyGrid | None = None,
    config: HeuristicConfig = HeuristicConfig(),
    blocked: dict[Cell, int] | None = None,
    weights: CostWeights = DEFAULT_WEIGHTS,
) -> HeuristicResult:
    """Build the configured number of complete schedules.

    Every patient must be placeable; an instance that defeats the scan on
    all machines is a contract breach and raises HeuristicError.
    """
    config.validate()
    base = occupancy if occupancy is not None else instance.occupancy
    rng = random.Random(config.seed)
    pool = ColumnPool()
    schedules: list[dict[str, ScheduleColumn]] = []
    costs: list[int] = []
    primary_link = {
        lk.primary: lk.secondary
        for lk in instance.links
        if lk.primary in instance.patients and lk.secondary in instance.patients
    }

    for i in range(config.num_schedules):
        rnd = _Round(instance, base, blocked, rng, config)
        chosen: dict[str, ScheduleColumn] = {}
        order = _ordered_patients(instance, rng, config)
        k = 0
        while k < len(order):
            patient = order[k]
            follow_id = primary_link.get(patient.id)
            if follow_id is None:
                course = _place_patient(rnd, patient, 1)
                if course is None:
                    raise HeuristicError(
                        "round %d: no feasible schedule found for patient %s"
                        % (i, patient.id)
                    )
                rnd.commit(course.tentative)
                chosen[patient.id] = _course_column(course, instance, weights)
                k += 1
                continue
            # linked pair: keep the primary uncommitted until the follower
            # lands 1..3 days after it
            follower = instance.patients[follow_id]
            floor = 1
            pair = None
            while pair is None:
                first = _place_patient(rnd, patient, floor)
                if first is None:
                    raise HeuristicError(
                        "round %d: no feasible schedule for linked pair %s+%s"
                        % (i, patient.id, follow_id)
                    )
                end = max(d for _, d, _ in first.booked)
                second = _place_patient(
                    rnd,
                    follower,
                    end + 1,
                    start_ceiling=end + 3,
                    carried=first.tentative,
                )
                if second is not None:
                    pair = (first, second)
                else:
                    floor = min(d for _, d, _ in first.booked) + 1
            first, second = pair
            rnd.commit(first.tentative)
            rnd.commit(second.tentative)
            chosen[patient.id] = _course_column(first, instance, weights)
            chosen[follow_id] = _course_column(second, instance, weights)
            k += 2
        for col in chosen.values():
            pool.add(col)
        schedules.append(chosen)
        costs.append(sum(c.cost for c in chosen.values()))
    return HeuristicResult(pool, schedules, costs)
