"""Brute-force schedule enumeration, the oracle side of dual-route tests.

Enumerates every feasible column of a patient by depth-first search.
Branch pruning uses only implications proven equivalent to validator
rules, and every completed candidate is final-filtered through
check_column, so the emitted support set equals the validator's by
construction (pruning can only cut columns the validator rejects).
Intended for tiny instances; guarded by a node budget.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

from .errors import RadschedError
from .model import (
    Instance,
    OccupancyGrid,
    Patient,
    ScheduleColumn,
    TreatmentKind,
    column_footprint,
)
from .validate import CostWeights, DEFAULT_WEIGHTS, check_column, column_cost


class EnumerationBudgetError(RadschedError):
    """The search space exceeded the configured node budget."""


def enumerate_columns(
    patient: Patient,
    instance: Instance,
    occupancy: OccupancyGrid | None = None,
    weights: CostWeights = DEFAULT_WEIGHTS,
    node_budget: int = 2_000_000,
) -> list[ScheduleColumn]:
    """All validator-clean columns for the patient, cost attached."""
    grid = occupancy if occupancy is not None else OccupancyGrid()
    protocol = instance.protocol_of(patient)
    kind = protocol.kind
    cal = instance.calendar
    topo = instance.topology
    eligible = sorted(protocol.eligible_machines)
    windows = list(instance.windows.windows())
    fractions_needed = patient.num_fractions

    nodes = 0
    found: list[ScheduleColumn] = []

    def cell_fits(machine: str, day: int, window: int, minutes: int) -> bool:
        return (
            grid.minutes(machine, day, window) + minutes
            <= instance.windows.length(window)
        )

    def start_candidates() -> Iterable[tuple[str, int, int]]:
        for day in instance.allowed_start_days(patient):
            for machine in eligible:
                if topo.is_unavailable(machine, day):
                    continue
                for window in windows:
                    if kind is TreatmentKind.TBI and window not in (1, 4):
                        continue
                    if cell_fits(machine, day, window, patient.dur_first):
                        yield machine, day, window

    def next_candidates(
        assigned: list[tuple[str, int, int]],
        group: frozenset[str],
        doubles_by_week: Mapping[int, int],
    ) -> Iterable[tuple[str, int, int]]:
        last_machine, last_day, _ = assigned[-1]
        start = assigned[0][1]
        last_day_windows = sorted(w for _, d, w in assigned if d == last_day)
        group_machines = [m for m in eligible if m in group]

        day_options: list[int] = []
        allow_double = False
        if kind is TreatmentKind.CONVENTIONAL:
            week_free = instance.free_week_for_group(group, cal.week_of(last_day))
            if week_free:
                # chain rule: in a closure-free week the next fraction must
                # sit on the very next day
                day_options = [last_day + 1]
            else:
                day_options = [last_day + d for d in (1, 2, 3)]
                allow_double = (
                    protocol.min_per_week == 5
                    and doubles_by_week.get(cal.week_of(last_day), 0) == 0
                    and last_day != start
                    and len(last_day_windows) == 1
                )
            if allow_double:
                day_options = [last_day] + day_options
            # gap landings right after a closure-free day break the chain too
            day_options = [
                d
                for d in day_options
                if d == last_day + 1
                or not (
                    cal.contains(d - 1)
                    and instance.free_week_for_group(group, cal.week_of(d - 1))
                )
            ]
            if protocol.min_per_week < 5:
                # pair-day rule: two consecutive closure-free days chain as well
                day_options = [
                    d
                    for d in day_options
                    if d == last_day + 1
                    or not any(
                        all(
                            not topo.is_unavailable(m, dd)
                            and not topo.is_unavailable(m, dd + 1)
                            for m in group
                        )
                        for dd in (last_day, d - 1)
                        if cal.contains(dd) and cal.contains(dd + 1)
                    )
                ]
        elif kind is TreatmentKind.EVERY_OTHER_DAY:
            day_options = [last_day + 2, last_day + 3]
            if cal.is_friday(last_day):
                day_options = [last_day + 1] + day_options
        elif kind is TreatmentKind.FIVE_PER_WEEK:
            day_options = [last_day + 1]
        else:  # TBI: fill the day's pair, then move on; span capped at 2
            if len(last_day_windows) == 1:
                day_options = [last_day]
                allow_double = True
            else:
                day_options = [last_day + 1]
            day_options = [d for d in day_options if d - start <= 2]

        for day in day_options:
            if not cal.contains(day):
                continue
            if day == last_day:
                if not allow_double or last_day_windows[0] not in (1, 4):
                    continue
                other = 4 if last_day_windows[0] == 1 else 1
                for machine in group_machines:
                    if topo.is_unavailable(machine, day):
                        continue
                    if cell_fits(machine, day, other, patient.dur_rest):
                        yield machine, day, other
                continue
            used_windows = {w for _, d, w in assigned if d == day}
            for machine in group_machines:
                if topo.is_unavailable(machine, day):
                    continue
                for window in windows:
                    if window in used_windows:
                        continue
                    if kind is TreatmentKind.TBI and window not in (1, 4):
                        continue
                    if cell_fits(machine, day, window, patient.dur_rest):
                        yield machine, day, window

    def dfs(
        assigned: list[tuple[str, int, int]],
        group: frozenset[str],
        doubles_by_week: dict[int, int],
    ) -> None:
        nonlocal nodes
        nodes += 1
        if nodes > node_budget:
            raise EnumerationBudgetError(
                f"column enumeration for {patient.id} exceeded {node_budget} nodes"
            )
        if len(assigned) == fractions_needed:
            column = ScheduleColumn(patient.id, tuple(assigned), 0)
            if not check_column(column, patient, instance, grid):
                cost = column_cost(column, patient, instance, weights)
                found.append(
                    ScheduleColumn(patient.id, tuple(assigned), cost)
                )
            return
        for machine, day, window in next_candidates(assigned, group, doubles_by_week):
            double_here = any(d == day for _, d, _ in assigned)
            if double_here:
                week = cal.week_of(day)
                doubles_by_week[week] = doubles_by_week.get(week, 0) + 1
            assigned.append((machine, day, window))
            dfs(assigned, group, doubles_by_week)
            assigned.pop()
            if double_here:
                week = cal.week_of(day)
                doubles_by_week[week] -= 1

    for machine, day, window in start_candidates():
        group = topo.beam_group_of(machine)
        if fractions_needed == 1:
            column = ScheduleColumn(patient.id, ((machine, day, window),), 0)
            if not check_column(column, patient, instance, grid):
                cost = column_cost(column, patient, instance, weights)
                found.append(ScheduleColumn(patient.id, ((machine, day, window),), cost))
            continue
        dfs([(machine, day, window)], group, {})

    found.sort(key=lambda col: (col.cost, col.assignments))
    return found


def min_cost_column(
    patient: Patient,
    instance: Instance,
    occupancy: OccupancyGrid | None = None,
    weights: CostWeights = DEFAULT_WEIGHTS,
    node_budget: int = 2_000_000,
) -> ScheduleColumn | None:
    columns = enumerate_columns(patient, instance, occupancy, weights, node_budget)
    return columns[0] if columns else None


def joint_minimum(
    instance: Instance,
    columns_by_patient: Mapping[str, Sequence[ScheduleColumn]],
    occupancy: OccupancyGrid | None = None,
) -> tuple[int, dict[str, ScheduleColumn]] | None:
    """Exhaustive best joint selection (one column per patient).

    Checks shared cell capacity on top of the base occupancy and the
    consecutive-link windows. Returns None when no joint selection is
    feasible. Exponential; only for tiny oracle instances.
    """
    patient_ids = sorted(instance.patients)
    for pid in patient_ids:
        if not columns_by_patient.get(pid):
            return None
    base = (occupancy if occupancy is not None else instance.occupancy).as_dict()
    best: tuple[int, dict[str, ScheduleColumn]] | None = None

    link_by_primary = {link.primary: link for link in instance.links}
    link_by_secondary = {link.secondary: link for link in instance.links}

    def link_ok(selection: dict[str, ScheduleColumn]) -> bool:
        for link in instance.links:
            if link.primary in selection and link.secondary in selection:
                end1 = selection[link.primary].end_day
                start2 = selection[link.secondary].start_day
                if not end1 + 1 <= start2 <= end1 + 3:
                    return False
        return True

    def dfs(index: int, load: dict, cost_so_far: int, selection: dict[str, ScheduleColumn]):
        nonlocal best
        if best is not None and cost_so_far >= best[0]:
            return
        if index == len(patient_ids):
            if link_ok(selection):
                best = (cost_so_far, dict(selection))
            return
        pid = patient_ids[index]
        patient = instance.patients[pid]
        for column in columns_by_patient[pid]:
            footprint = column_footprint(column, patient)
            fits = True
            for cell, minutes in footprint.items():
                limit = instance.windows.length(cell[2])
                if load.get(cell, 0) + minutes > limit:
                    fits = False
                    break
            if not fits:
                continue
            selection[pid] = column
            # prune partial link windows early when both sides chosen
            partial_ok = True
            for link in (link_by_primary.get(pid), link_by_secondary.get(pid)):
                if link and link.primary in selection and link.secondary in selection:
                    end1 = selection[link.primary].end_day
                    start2 = selection[link.secondary].start_day
                    if not end1 + 1 <= start2 <= end1 + 3:
                        partial_ok = False
            if partial_ok:
                for cell, minutes in footprint.items():
                    load[cell] = load.get(cell, 0) + minutes
                dfs(index + 1, load, cost_so_far + column.cost, selection)
                for cell, minutes in footprint.items():
                    load[cell] -= minutes
            del selection[pid]

    dfs(0, dict(base), 0, {})
    return best
