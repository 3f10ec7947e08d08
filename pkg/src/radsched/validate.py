"""Rule catalogue: column feasibility checks and the column cost function.

`check_column` recomputes every placement rule from the raw assignment
list and never trusts derived fields; it is the ground truth the model
builders and the heuristic are tested against. Violations carry stable
rule ids so tests and the CLI can match on them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .calendars import NUM_WINDOWS
from .errors import InfeasibleColumnError, InstanceError
from .model import (
    Instance,
    OccupancyGrid,
    Patient,
    ScheduleColumn,
    StartDayRule,
    TreatmentKind,
    column_footprint,
)

# rule ids, fixed vocabulary
FRAC_ONCE = "frac-once"
START_DAY = "start-day"
MACHINE_ALLOWED = "machine-allowed"
WINDOW_FIT = "window-fit"
CONSEC_FREE_WEEK = "consec-free-week"
CONSEC_FREE_PAIR = "consec-free-pair"
SAME_BEAM_GROUP = "same-beam-group"
FRAC_ORDER = "frac-order"
MAX1_FREE_WEEK = "max1-free-week"
MAX1_LOWFREQ = "max1-lowfreq"
MAX2_UNAVAIL_WEEK = "max2-unavail-week"
ONE_DOUBLE_PER_WEEK = "one-double-day-per-week"
MAX_GAP = "max-gap"
NO_DOUBLE_FIRST_DAY = "no-double-first-day"
DOUBLE_DAY_WINDOWS = "double-day-windows"
MIN_FRAC_WEEK = "min-frac-week"
EVERY_OTHER_DAY = "every-other-day"
FIVE_IN_ONE_WEEK = "five-in-one-week"
TBI_SPAN = "tbi-span"
CONSEC_LINK = "consec-link"
PARTITION = "partition"


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str

    def __str__(self) -> str:
        return f"[{self.rule}] {self.message}"


@dataclass(frozen=True)
class CostWeights:
    """Weights for the seven cost terms, in fixed term order."""

    waiting: int = 100
    window_switch: int = 1
    window_preference: int = 1
    machine_preference: int = 10
    machine_switch: int = 10
    site_preference: int = 50
    excess_days: int = 300

    def as_tuple(self) -> tuple[int, ...]:
        return (
            self.waiting,
            self.window_switch,
            self.window_preference,
            self.machine_preference,
            self.machine_switch,
            self.site_preference,
            self.excess_days,
        )


DEFAULT_WEIGHTS = CostWeights()

# cost terms suppressed for capacity-reservation placeholders
PLACEHOLDER_MASK = frozenset({2, 3, 5})


@dataclass(frozen=True)
class CostBreakdown:
    """Raw (unweighted) values of the seven cost terms."""

    waiting_days: int
    urgency_weight: int
    window_switches: int
    window_preference_misses: int
    nonpreferred_machine_fractions: int
    machine_switches: int
    offsite_fractions: int
    excess_days: int

    def terms(self) -> tuple[int, ...]:
        """Term values in weight order; term 1 includes the urgency weight."""
        return (
            self.urgency_weight * self.waiting_days,
            self.window_switches,
            self.window_preference_misses,
            self.nonpreferred_machine_fractions,
            self.machine_switches,
            self.offsite_fractions,
            self.excess_days,
        )

    def weighted(
        self,
        weights: CostWeights = DEFAULT_WEIGHTS,
        masked_terms: frozenset[int] = frozenset(),
    ) -> int:
        total = 0
        for term_index, (weight, value) in enumerate(
            zip(weights.as_tuple(), self.terms()), start=1
        ):
            if term_index in masked_terms:
                continue
            total += weight * value
        return total


def _check_references(column: ScheduleColumn, instance: Instance) -> None:
    fleet = set(instance.topology.machines)
    for machine, day, window in column.assignments:
        if machine not in fleet:
            raise InstanceError(f"column references unknown machine {machine}")
        if not instance.calendar.contains(day):
            raise InstanceError(f"column references day {day} outside horizon")
        if not 1 <= window <= NUM_WINDOWS:
            raise InstanceError(f"column references window {window}")


def _start_rule_ok(instance: Instance, rule: StartDayRule, day: int) -> bool:
    if rule is StartDayRule.NOT_FRIDAY:
        return not instance.calendar.is_friday(day)
    if rule is StartDayRule.MONDAY:
        return instance.calendar.is_monday(day)
    return True


def check_column(
    column: ScheduleColumn,
    patient: Patient,
    instance: Instance,
    occupancy: OccupancyGrid | None = None,
) -> list[Violation]:
    """All placement-rule violations of a column, empty when clean.

    `occupancy` is the pre-booked grid the column must fit on top of;
    None checks only against empty cells (window lengths still apply).
    """
    _check_references(column, instance)
    protocol = instance.protocol_of(patient)
    kind = protocol.kind
    cal = instance.calendar
    grid = occupancy if occupancy is not None else OccupancyGrid()
    out: list[Violation] = []

    fractions = column.assignments
    count = len(fractions)
    if count != patient.num_fractions:
        out.append(
            Violation(
                FRAC_ONCE,
                f"column has {count} fractions, course needs {patient.num_fractions}",
            )
        )
        return out

    days = [day for _, day, _ in fractions]
    machines = [machine for machine, _, _ in fractions]

    # first-fraction day rules
    start = days[0]
    if start < patient.effective_earliest:
        out.append(
            Violation(
                START_DAY,
                f"start day {start} before earliest allowed {patient.effective_earliest}",
            )
        )
    if not _start_rule_ok(instance, protocol.start_rule, start):
        out.append(
            Violation(START_DAY, f"start day {start} breaks rule {protocol.start_rule.value}")
        )

    # machine eligibility and closure days
    for f, (machine, day, _) in enumerate(fractions, start=1):
        if machine not in protocol.eligible_machines:
            out.append(
                Violation(
                    MACHINE_ALLOWED,
                    f"fraction {f} on machine {machine} not allowed by protocol {protocol.id}",
                )
            )
        elif instance.topology.is_unavailable(machine, day):
            out.append(
                Violation(MACHINE_ALLOWED, f"fraction {f} on closed machine-day ({machine},{day})")
            )

    # capacity per touched cell
    footprint = column_footprint(column, patient)
    for (machine, day, window), minutes in sorted(footprint.items()):
        limit = instance.windows.length(window)
        booked = grid.minutes(machine, day, window)
        if booked + minutes > limit:
            out.append(
                Violation(
                    WINDOW_FIT,
                    f"cell ({machine},{day},{window}) needs {booked + minutes} min "
                    f"of a {limit} min window",
                )
            )

    # day ordering
    for f in range(count - 1):
        if days[f + 1] < days[f]:
            out.append(
                Violation(FRAC_ORDER, f"fraction {f + 2} before fraction {f + 1} in days")
            )

    # one beam group for the whole course
    groups = {instance.topology.beam_group_of(m) for m in machines}
    if len(groups) > 1:
        out.append(Violation(SAME_BEAM_GROUP, "course spans more than one beam group"))

    # gap cap
    for f in range(count - 1):
        if days[f + 1] - days[f] > 3:
            out.append(
                Violation(
                    MAX_GAP,
                    f"gap of {days[f + 1] - days[f]} days after fraction {f + 1}",
                )
            )

    per_day: dict[int, int] = {}
    for day in days:
        per_day[day] = per_day.get(day, 0) + 1

    # per-day window patterns
    seen_cells: set[tuple[int, int]] = set()
    for machine, day, window in fractions:
        if (day, window) in seen_cells:
            out.append(
                Violation(DOUBLE_DAY_WINDOWS, f"window {window} used twice on day {day}")
            )
        seen_cells.add((day, window))
    for day, n in sorted(per_day.items()):
        if n >= 2:
            windows = sorted(w for _, d, w in fractions if d == day)
            if n > 2 or windows != [1, 4]:
                out.append(
                    Violation(
                        DOUBLE_DAY_WINDOWS,
                        f"day {day} carries {n} fractions in windows {windows}, "
                        "a double day must use exactly the first and last window",
                    )
                )

    if kind is not TreatmentKind.TBI:
        if count > 1 and days[1] == days[0]:
            out.append(Violation(NO_DOUBLE_FIRST_DAY, "two fractions on the first day"))
        # at most one double day per week
        weeks_of_days = sorted({cal.week_of(d) for d in per_day})
        for week in weeks_of_days:
            wdays = [d for d in per_day if cal.week_of(d) == week]
            for i, d1 in enumerate(sorted(wdays)):
                for d2 in sorted(wdays)[i + 1 :]:
                    if per_day[d1] + per_day[d2] > 3:
                        out.append(
                            Violation(
                                ONE_DOUBLE_PER_WEEK,
                                f"days {d1} and {d2} in week {week} carry "
                                f"{per_day[d1] + per_day[d2]} fractions",
                            )
                        )

    column_groups = sorted(groups, key=sorted)  # deterministic order

    if protocol.min_per_week < 5 and kind is not TreatmentKind.TBI:
        for day, n in sorted(per_day.items()):
            if n > 1:
                out.append(
                    Violation(
                        MAX1_LOWFREQ,
                        f"{n} fractions on day {day} for a below-daily course",
                    )
                )

    if kind is not TreatmentKind.TBI:
        for group in column_groups:
            for day in sorted(per_day):
                n_group = sum(
                    1 for m, d, _ in fractions if d == day and m in group
                )
                if n_group > 1 and instance.free_week_for_group(group, cal.week_of(day)):
                    out.append(
                        Violation(
                            MAX1_FREE_WEEK,
                            f"{n_group} fractions on day {day} in a closure-free week",
                        )
                    )

    if protocol.min_per_week == 5 and kind is not TreatmentKind.TBI:
        for group in column_groups:
            for day in sorted(per_day):
                n_group = sum(1 for m, d, _ in fractions if d == day and m in group)
                if n_group > 2 and not instance.free_week_for_group(group, cal.week_of(day)):
                    out.append(
                        Violation(
                            MAX2_UNAVAIL_WEEK,
                            f"{n_group} fractions on day {day}",
                        )
                    )

    if kind is TreatmentKind.CONVENTIONAL:
        out.extend(_check_free_week_chain(column, instance, column_groups))
        if protocol.min_per_week < 5:
            out.extend(_check_pair_day_chain(column, instance, column_groups))
    elif kind is TreatmentKind.EVERY_OTHER_DAY:
        for f in range(count - 1):
            gap = days[f + 1] - days[f]
            if gap >= 2:
                continue
            if gap == 1 and cal.is_friday(days[f]):
                continue
            out.append(
                Violation(
                    EVERY_OTHER_DAY,
                    f"fractions {f + 1} and {f + 2} only {gap} days apart",
                )
            )
    elif kind is TreatmentKind.FIVE_PER_WEEK:
        for f in range(count - 1):
            if days[f + 1] != days[f] + 1:
                out.append(
                    Violation(
                        FIVE_IN_ONE_WEEK,
                        f"fractions {f + 1} and {f + 2} not on consecutive days",
                    )
                )
    elif kind is TreatmentKind.TBI:
        if days[-1] - days[0] != 2:
            out.append(
                Violation(
                    TBI_SPAN,
                    f"course spans {days[-1] - days[0]} days instead of 2",
                )
            )

    if patient.num_fractions > 5 and kind in (
        TreatmentKind.CONVENTIONAL,
        TreatmentKind.EVERY_OTHER_DAY,
    ):
        start_week = cal.week_of(days[0])
        end_week = cal.week_of(days[-1])
        per_week: dict[int, int] = {}
        for day in days:
            week = cal.week_of(day)
            per_week[week] = per_week.get(week, 0) + 1
        for week in range(start_week + 1, end_week):
            n = per_week.get(week, 0)
            if n < protocol.min_per_week:
                out.append(
                    Violation(
                        MIN_FRAC_WEEK,
                        f"intermediate week {week} has {n} fractions, "
                        f"needs {protocol.min_per_week}",
                    )
                )

    return out


def _group_day_fraction(
    column: ScheduleColumn, group: frozenset[str]
) -> dict[tuple[int, int], bool]:
    """(day, fraction) -> landed on a machine of the group."""
    table: dict[tuple[int, int], bool] = {}
    for f, (machine, day, _) in enumerate(column.assignments, start=1):
        if machine in group:
            table[(day, f)] = True
    return table


def _check_free_week_chain(
    column: ScheduleColumn, instance: Instance, groups
) -> list[Violation]:
    """In closure-free weeks, fraction f on day d forces f+1 on day d+1."""
    cal = instance.calendar
    out = []
    count = len(column.assignments)
    for group in groups:
        table = _group_day_fraction(column, group)
        for f in range(1, count):
            for day in cal.days():
                if not instance.free_week_for_group(group, cal.week_of(day)):
                    continue
                here = table.get((day, f), False)
                there = table.get((day + 1, f + 1), False) if day + 1 <= cal.num_days else False
                if here != there:
                    out.append(
                        Violation(
                            CONSEC_FREE_WEEK,
                            f"fractions {f},{f + 1} break the consecutive-day chain "
                            f"around day {day}",
                        )
                    )
    return out


def _check_pair_day_chain(
    column: ScheduleColumn, instance: Instance, groups
) -> list[Violation]:
    """Below-daily courses: consecutive days both free of closures for the
    whole beam group still chain fraction f to f+1."""
    cal = instance.calendar
    topo = instance.topology
    out = []
    count = len(column.assignments)
    for group in groups:
        table = _group_day_fraction(column, group)
        for day in range(1, cal.num_days):
            if any(
                topo.is_unavailable(m, day) or topo.is_unavailable(m, day + 1)
                for m in group
            ):
                continue
            for f in range(1, count):
                here = table.get((day, f), False)
                there = table.get((day + 1, f + 1), False)
                if here != there:
                    out.append(
                        Violation(
                            CONSEC_FREE_PAIR,
                            f"fractions {f},{f + 1} break the pair-day chain at day {day}",
                        )
                    )
    return out


def column_breakdown(
    column: ScheduleColumn, patient: Patient, instance: Instance
) -> CostBreakdown:
    """Raw cost-term values; assumes a structurally valid column."""
    protocol = instance.protocol_of(patient)
    days = column.days()

    profiles: dict[int, frozenset[int]] = {}
    for _, day, window in column.assignments:
        profiles[day] = profiles.get(day, frozenset()) | {window}
    # switches are counted between the first and last treatment day; the
    # empty days before the course starts and after it ends do not count
    switches = 0
    for day in range(days[0], days[-1]):
        if profiles.get(day, frozenset()) != profiles.get(day + 1, frozenset()):
            switches += 1

    pref_misses = 0
    if patient.window_preference is not None:
        pref_misses = sum(
            1 for _, _, w in column.assignments if w != patient.window_preference
        )

    nonpreferred = sum(
        1 for m, _, _ in column.assignments if m not in protocol.preferred_machines
    )

    machine_switches = 0
    for f in range(len(column.assignments) - 1):
        here = instance.topology.complete_class_of(column.assignments[f][0])
        there = instance.topology.complete_class_of(column.assignments[f + 1][0])
        if here != there:
            machine_switches += 1

    offsite = 0
    if patient.site_preference is not None:
        wanted = instance.site_machines(patient.site_preference)
        offsite = sum(1 for m, _, _ in column.assignments if m not in wanted)

    return CostBreakdown(
        waiting_days=days[0] - patient.earliest_start,
        urgency_weight=protocol.priority.weight,
        window_switches=switches,
        window_preference_misses=pref_misses,
        nonpreferred_machine_fractions=nonpreferred,
        machine_switches=machine_switches,
        offsite_fractions=offsite,
        excess_days=max(0, days[-1] - days[0] - patient.num_fractions),
    )


def column_cost(
    column: ScheduleColumn,
    patient: Patient,
    instance: Instance,
    weights: CostWeights = DEFAULT_WEIGHTS,
    masked_terms: frozenset[int] = frozenset(),
) -> int:
    """Weighted cost of a column; raises on placement-rule violations.

    Capacity is not part of the cost, so the feasibility gate here runs
    against an empty grid (window lengths still apply).
    """
    violations = check_column(column, patient, instance, occupancy=None)
    if violations:
        raise InfeasibleColumnError(
            f"column for {patient.id} is infeasible", violations
        )
    if patient.is_placeholder:
        masked_terms = masked_terms | PLACEHOLDER_MASK
    return column_breakdown(column, patient, instance).weighted(weights, masked_terms)


def check_master_solution(
    selected: Mapping[str, ScheduleColumn],
    instance: Instance,
) -> list[Violation]:
    """Joint checks over one chosen column per patient.

    Columns are individually validated against an empty grid, then the
    shared capacity (on top of the instance's base occupancy) and the
    consecutive-course link windows are checked jointly.
    """
    out: list[Violation] = []
    for pid in sorted(instance.patients):
        if pid not in selected:
            out.append(Violation(PARTITION, f"no column selected for patient {pid}"))
    for pid in sorted(selected):
        if pid not in instance.patients:
            raise InstanceError(f"selection references unknown patient {pid}")
        column = selected[pid]
        if column.patient_id != pid:
            raise InstanceError(f"column for {pid} is labeled {column.patient_id}")
        for violation in check_column(column, instance.patients[pid], instance, None):
            out.append(Violation(violation.rule, f"{pid}: {violation.message}"))

    load = instance.occupancy.copy()
    for pid in sorted(selected):
        if pid in instance.patients:
            load.add_footprint(column_footprint(selected[pid], instance.patients[pid]))
    for (machine, day, window), minutes in load.cells():
        limit = instance.windows.length(window)
        if minutes > limit:
            out.append(
                Violation(
                    WINDOW_FIT,
                    f"cell ({machine},{day},{window}) booked {minutes} min "
                    f"of a {limit} min window",
                )
            )

    for link in instance.links:
        if link.primary in selected and link.secondary in selected:
            end1 = selected[link.primary].end_day
            start2 = selected[link.secondary].start_day
            if not end1 + 1 <= start2 <= end1 + 3:
                out.append(
                    Violation(
                        CONSEC_LINK,
                        f"{link.secondary} starts day {start2}, needs "
                        f"{end1 + 1}..{end1 + 3} after {link.primary}",
                    )
                )
    return out
