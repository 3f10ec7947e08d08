"""Single-patient scheduling subproblem.

Builds one integer program per patient that selects a machine, a day and a
time window for every fraction, subject to the full rule catalogue enforced
by :mod:`radsched.validate`.  The objective is the discomfort cost of the
schedule minus the price currently attached to the capacity it would consume,
so an optimal solution with negative value is a column worth adding to the
restricted master problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .calendars import NUM_WINDOWS
from .errors import KernelError
from .milp import EPS_RC, GE, LE, EQ, IpStatus, LinearModel, solve_ip, solve_lp
from .model import (
    Instance,
    Patient,
    Priority,
    ScheduleColumn,
    TreatmentKind,
    column_footprint,
)
from .validate import CostWeights, DEFAULT_WEIGHTS, PLACEHOLDER_MASK, column_cost

__all__ = [
    "DualPrices",
    "LinkRole",
    "PricingModel",
    "PricingResult",
    "build_pricing_model",
    "solve_pricing",
    "price_patient",
    "reduced_cost",
]


@dataclass(frozen=True)
class DualPrices:
    """Prices read off the restricted master LP.

    ``assignment`` maps patient id to the price of its partition row,
    ``capacity`` maps (machine, day, window) to the price of that cell
    (nonpositive), and ``link_lo`` / ``link_hi`` map a link index to the
    prices of its two spacing rows (both nonpositive).
    """

    assignment: Mapping[str, float] = field(default_factory=dict)
    capacity: Mapping[tuple[str, int, int], float] = field(default_factory=dict)
    link_lo: Mapping[int, float] = field(default_factory=dict)
    link_hi: Mapping[int, float] = field(default_factory=dict)

    @staticmethod
    def zero() -> "DualPrices":
        return DualPrices()

    def assignment_of(self, patient_id: str) -> float:
        return float(self.assignment.get(patient_id, 0.0))

    def capacity_of(self, cell: tuple[str, int, int]) -> float:
        return float(self.capacity.get(cell, 0.0))


# (role, link index) where role is "primary" or "secondary"; None when the
# patient is not half of a consecutive pair.
LinkRole = tuple[str, int] | None


@dataclass
class PricingModel:
    """A built subproblem plus the index maps needed to read a solution."""

    model: LinearModel
    patient: Patient
    instance: Instance
    duals: DualPrices
    link_role: LinkRole
    weights: CostWeights
    masked_terms: frozenset[int]
    q_idx: dict[tuple[int, str, int], int]
    x_idx: dict[tuple[str, int, int], int]
    t_idx: dict[tuple[str, int, int], int]

    def extract_column(self, solution) -> ScheduleColumn:
        """Turn an incumbent of the subproblem into a schedule column."""
        pat = self.patient
        frac_day: dict[int, tuple[str, int]] = {}
        for (f, m, d), j in self.q_idx.items():
            if solution[j] > 0.5:
                frac_day[f] = (m, d)
        if len(frac_day) != pat.num_fractions:
            raise KernelError("subproblem solution does not place every fraction")
        first_cell = None
        for (m, d, w), j in self.t_idx.items():
            if solution[j] > 0.5:
                first_cell = (m, d, w)
        if first_cell is None:
            raise KernelError("subproblem solution has no first-fraction window")
        open_windows: dict[tuple[str, int], list[int]] = {}
        for (m, d, w), j in self.x_idx.items():
            if solution[j] > 0.5:
                open_windows.setdefault((m, d), []).append(w)
        for ws in open_windows.values():
            ws.sort()
        assignments = []
        for f in range(1, pat.num_fractions + 1):
            m, d = frac_day[f]
            if f == 1:
                w = first_cell[2]
                if (first_cell[0], first_cell[1]) != (m, d):
                    raise KernelError("first-fraction window disagrees with its day")
            else:
                avail = open_windows.get((m, d), [])
                if f > 1 and frac_day.get(1) == (m, d) and first_cell[2] in avail:
                    avail = [w for w in avail if w != first_cell[2]]
                    open_windows[(m, d)] = avail
                if not avail:
                    raise KernelError("no open window left for fraction %d" % f)
                w = avail.pop(0)
            assignments.append((m, d, w))
        cost = column_cost(
            ScheduleColumn(pat.id, tuple(assignments), 0),
            pat,
            self.instance,
            weights=self.weights,
            masked_terms=self.masked_terms,
        )
        return ScheduleColumn(pat.id, tuple(assignments), cost)


@dataclass(frozen=True)
class PricingResult:
    status: IpStatus
    column: ScheduleColumn | None
    reduced_cost: float | None
    objective: float | None


def _patient_mask(patient: Patient, masked_terms: frozenset[int] | None) -> frozenset[int]:
    if masked_terms is not None:
        return frozenset(masked_terms)
    if patient.is_placeholder:
        return PLACEHOLDER_MASK
    return frozenset()


def build_pricing_model(
    patient: Patient,
    instance: Instance,
    duals: DualPrices,
    link_role: LinkRole = None,
    weights: CostWeights = DEFAULT_WEIGHTS,
    masked_terms: frozenset[int] | None = None,
) -> PricingModel:
    """Assemble the single-patient subproblem.

    ``instance.occupancy`` must already contain whatever reservation blocking
    the caller wants this patient to see; the builder only reads remaining
    capacity from it.
    """
    protocol = instance.protocol_of(patient)
    cal = instance.calendar
    layout = instance.windows
    topo = instance.topology
    kind = protocol.kind
    fractions = range(1, patient.num_fractions + 1)
    num_frac = patient.num_fractions
    mask = _patient_mask(patient, masked_terms)
    eff = patient.effective_earliest
    machines = sorted(protocol.eligible_machines)
    preferred = protocol.preferred_machines
    site_pref = patient.site_preference
    window_pref = patient.window_preference

    model = LinearModel("price-%s" % patient.id)

    # Machine-day grid: keep only open days of eligible machines from the
    # patient's effective earliest day onward.
    pairs: list[tuple[str, int]] = []
    for m in machines:
        for d in range(max(1, eff), cal.num_days + 1):
            if not topo.is_unavailable(m, d):
                pairs.append((m, d))
    start_days = set(instance.allowed_start_days(patient))

    # Reachability: fraction f needs lo(f) days after the start and hi(f)
    # days before the finish.  Kinds that never put two fractions on one
    # day need a day per fraction; the catch-up kinds need half that.
    if kind is TreatmentKind.TBI:
        frac_lo = [(f - 1) // 2 for f in range(num_frac + 1)]
        frac_hi = [(num_frac - f) // 2 for f in range(num_frac + 1)]
    elif kind is TreatmentKind.CONVENTIONAL and protocol.min_per_week == 5:
        frac_lo = [f // 2 for f in range(num_frac + 1)]
        frac_hi = [(num_frac - f) // 2 for f in range(num_frac + 1)]
    else:
        frac_lo = [f - 1 for f in range(num_frac + 1)]
        frac_hi = [num_frac - f for f in range(num_frac + 1)]
    first_start = min(start_days) if start_days else cal.num_days + 1

    q_idx: dict[tuple[int, str, int], int] = {}
    x_idx: dict[tuple[str, int, int], int] = {}
    t_idx: dict[tuple[str, int, int], int] = {}

    def cell_price(m: str, d: int, w: int) -> float:
        return duals.capacity_of((m, d, w))

    link_primary = link_role is not None and link_role[0] == "primary"
    link_secondary = link_role is not None and link_role[0] == "secondary"
    if link_role is not None:
        eta = float(duals.link_lo.get(link_role[1], 0.0))
        xi = float(duals.link_hi.get(link_role[1], 0.0))
    else:
        eta = xi = 0.0

    for m, d in pairs:
        off_site = 1 if (site_pref is not None and topo.site_of(m) != site_pref) else 0
        non_pref = 1 if m not in preferred else 0
        for f in fractions:
            if f == 1 and d not in start_days:
                continue
            if d < first_start + frac_lo[f] or d > cal.num_days - frac_hi[f]:
                continue
            obj = 0.0
            if f == 1:
                obj += weights.waiting * protocol.priority.weight * (d - patient.earliest_start)
            if 4 not in mask:
                obj += weights.machine_preference * non_pref
            if 6 not in mask:
                obj += weights.site_preference * off_site
            if f == num_frac and link_primary:
                obj += -(eta - xi) * d
            if f == 1 and link_secondary:
                obj += -(xi - eta) * d
            q_idx[(f, m, d)] = model.add_var(
                "q[%d,%s,%d]" % (f, m, d), lb=0, ub=1, obj=obj, integer=True
            )
        has_any_q = any((f, m, d) in q_idx for f in fractions)
        if not has_any_q:
            continue
        for w in layout.windows():
            x_idx[(m, d, w)] = model.add_var(
                "x[%s,%d,%d]" % (m, d, w),
                lb=0,
                ub=1,
                obj=-cell_price(m, d, w) * patient.dur_rest,
                integer=True,
            )
            if (1, m, d) in q_idx:
                t_idx[(m, d, w)] = model.add_var(
                    "t[%s,%d,%d]" % (m, d, w),
                    lb=0,
                    ub=1,
                    obj=-cell_price(m, d, w) * (patient.dur_first - patient.dur_rest),
                    integer=True,
                )

    if not any((1, m, d) in q_idx for m, d in pairs):
        model.tag_infeasible("no open start cell for patient %s" % patient.id)
        return PricingModel(
            model, patient, instance, duals, link_role, weights, mask, q_idx, x_idx, t_idx
        )

    # every fraction happens exactly once
    for f in fractions:
        coeffs = {j: 1.0 for (ff, _, _), j in q_idx.items() if ff == f}
        if not coeffs:
            model.tag_infeasible("fraction %d of %s has no open cell" % (f, patient.id))
            return PricingModel(
                model, patient, instance, duals, link_role, weights, mask, q_idx, x_idx, t_idx
            )
        model.add_constr("once[%d]" % f, coeffs, EQ, 1.0)

    # the first fraction claims exactly one window on its day
    for m, d in pairs:
        if (1, m, d) not in q_idx:
            continue
        coeffs = {q_idx[(1, m, d)]: 1.0}
        for w in layout.windows():
            coeffs[t_idx[(m, d, w)]] = -1.0
        model.add_constr("first-window[%s,%d]" % (m, d), coeffs, EQ, 0.0)

    # a first-fraction window must be an occupied window
    for (m, d, w), j in t_idx.items():
        model.add_constr(
            "first-in-open[%s,%d,%d]" % (m, d, w), {j: 1.0, x_idx[(m, d, w)]: -1.0}, LE, 0.0
        )

    # windows occupied on a day equal fractions placed on that day
    for m, d in pairs:
        fs = [q_idx[(f, m, d)] for f in fractions if (f, m, d) in q_idx]
        if not fs:
            continue
        coeffs = {x_idx[(m, d, w)]: 1.0 for w in layout.windows()}
        for j in fs:
            coeffs[j] = coeffs.get(j, 0.0) - 1.0
        model.add_constr("day-count[%s,%d]" % (m, d), coeffs, EQ, 0.0)

    # remaining minutes of each window cell
    for (m, d, w), j in x_idx.items():
        booked = instance.occupancy.minutes(m, d, w)
        coeffs = {j: float(patient.dur_rest)}
        if (m, d, w) in t_idx:
            coeffs[t_idx[(m, d, w)]] = float(patient.dur_first - patient.dur_rest)
        model.add_constr(
            "fit[%s,%d,%d]" % (m, d, w), coeffs, LE, float(layout.length(w) - booked)
        )

    groups = []
    for group in topo.beam_groups:
        members = sorted(group & set(machines))
        if members:
            groups.append((group, members))
    closure_weeks = instance.unavailable_weeks()

    def group_frac_on(members: list[str], f: int, d: int) -> dict[int, float]:
        return {
            q_idx[(f, m, d)]: 1.0 for m in members if (f, m, d) in q_idx
        }

    if kind is TreatmentKind.CONVENTIONAL:
        # in a week without closures, treatment runs on consecutive days
        for group, members in groups:
            weeks = closure_weeks.get(group, frozenset())
            for d in range(1, cal.num_days + 1):
                if cal.week_of(d) in weeks:
                    continue
                for f in range(1, num_frac):
                    coeffs = dict(group_frac_on(members, f, d))
                    for j, v in group_frac_on(members, f + 1, d + 1).items():
                        coeffs[j] = coeffs.get(j, 0.0) - v
                    if coeffs:
                        model.add_constr(
                            "free-week-chain[%s,%d,%d]" % (min(group), d, f), coeffs, EQ, 0.0
                        )
        if protocol.min_per_week < 5:
            for group, members in groups:
                for d in range(1, cal.num_days):
                    whole = sorted(group)
                    if any(topo.is_unavailable(m, d) for m in whole):
                        continue
                    if any(topo.is_unavailable(m, d + 1) for m in whole):
                        continue
                    for f in range(1, num_frac):
                        coeffs = dict(group_frac_on(members, f, d))
                        for j, v in group_frac_on(members, f + 1, d + 1).items():
                            coeffs[j] = coeffs.get(j, 0.0) - v
                        if coeffs:
                            model.add_constr(
                                "pair-chain[%s,%d,%d]" % (min(group), d, f), coeffs, EQ, 0.0
                            )

    # consecutive fractions stay inside one beam-matched group
    for group, members in groups:
        for f in range(1, num_frac):
            coeffs = {}
            for d in range(1, cal.num_days + 1):
                for j, v in group_frac_on(members, f, d).items():
                    coeffs[j] = coeffs.get(j, 0.0) + v
                for j, v in group_frac_on(members, f + 1, d).items():
                    coeffs[j] = coeffs.get(j, 0.0) - v
            if coeffs:
                model.add_constr("stay-in-group[%s,%d]" % (min(group), f), coeffs, EQ, 0.0)

    def day_expr(f: int, sign: float) -> dict[int, float]:
        return {
            j: sign * d for (ff, _, d), j in q_idx.items() if ff == f
        }

    # one aggregate per fraction carries its treatment day, so the
    # ordering and spacing rows below stay two or three entries wide
    y_idx: dict[int, int] = {}
    for f in fractions:
        y_idx[f] = model.add_var(
            "y[%d]" % f,
            lb=float(first_start + frac_lo[f]),
            ub=float(cal.num_days - frac_hi[f]),
            obj=0.0,
            integer=False,
        )
        coeffs = day_expr(f, 1.0)
        coeffs[y_idx[f]] = -1.0
        model.add_constr("day-def[%d]" % f, coeffs, EQ, 0.0)

    # fractions happen in day order
    for f in range(1, num_frac):
        model.add_constr(
            "day-order[%d]" % f, {y_idx[f]: 1.0, y_idx[f + 1]: -1.0}, LE, 0.0
        )

    if kind is not TreatmentKind.TBI:
        # no doubled-up days in weeks without closures
        for group, members in groups:
            weeks = closure_weeks.get(group, frozenset())
            for d in range(1, cal.num_days + 1):
                if cal.week_of(d) in weeks:
                    continue
                coeffs = {}
                for f in fractions:
                    for j, v in group_frac_on(members, f, d).items():
                        coeffs[j] = coeffs.get(j, 0.0) + v
                if coeffs:
                    model.add_constr(
                        "free-week-single[%s,%d]" % (min(group), d), coeffs, LE, 1.0
                    )

    if kind is not TreatmentKind.TBI and protocol.min_per_week < 5:
        for d in range(1, cal.num_days + 1):
            coeffs = {j: 1.0 for (f, _, dd), j in q_idx.items() if dd == d}
            if coeffs:
                model.add_constr("one-per-day[%d]" % d, coeffs, LE, 1.0)

    if kind is not TreatmentKind.TBI and protocol.min_per_week == 5:
        # closure-affected weeks allow catching up with one extra fraction
        for group, members in groups:
            weeks = closure_weeks.get(group, frozenset())
            for d in range(1, cal.num_days + 1):
                if cal.week_of(d) not in weeks:
                    continue
                coeffs = {}
                for f in fractions:
                    for j, v in group_frac_on(members, f, d).items():
                        coeffs[j] = coeffs.get(j, 0.0) + v
                if coeffs:
                    model.add_constr(
                        "two-per-day[%s,%d]" % (min(group), d), coeffs, LE, 2.0
                    )

    if kind is not TreatmentKind.TBI:
        for g in cal.weeks():
            days = list(cal.days_of_week(g))
            for i, d1 in enumerate(days):
                for d2 in days[i + 1 :]:
                    coeffs: dict[int, float] = {}
                    hit1 = hit2 = False
                    for (f, m, dd), j in q_idx.items():
                        if dd == d1:
                            coeffs[j] = coeffs.get(j, 0.0) + 1.0
                            hit1 = True
                        elif dd == d2:
                            coeffs[j] = coeffs.get(j, 0.0) + 1.0
                            hit2 = True
                    if hit1 and hit2:
                        model.add_constr(
                            "pair-days-cap[%d,%d]" % (d1, d2), coeffs, LE, 3.0
                        )

    # never more than three open days between consecutive fractions
    for f in range(1, num_frac):
        model.add_constr(
            "max-gap[%d]" % f, {y_idx[f + 1]: 1.0, y_idx[f]: -1.0}, LE, 3.0
        )

    if num_frac > 1 and kind is not TreatmentKind.TBI:
        model.add_constr(
            "second-day-later", {y_idx[2]: 1.0, y_idx[1]: -1.0}, GE, 1.0
        )

    # at most one long window, or two short ones, per day
    for d in range(1, cal.num_days + 1):
        coeffs = {}
        for (m, dd, w), j in x_idx.items():
            if dd != d:
                continue
            coeffs[j] = 2.0 if w in (2, 3) else 1.0
        if coeffs:
            model.add_constr("window-budget[%d]" % d, coeffs, LE, 2.0)

    for d in range(1, cal.num_days + 1):
        for w in range(1, NUM_WINDOWS + 1):
            coeffs = {j: 1.0 for (m, dd, ww), j in x_idx.items() if dd == d and ww == w}
            if len(coeffs) > 1:
                model.add_constr("cell-once[%d,%d]" % (d, w), coeffs, LE, 1.0)

    if kind is TreatmentKind.EVERY_OTHER_DAY:
        fridays = {d for d in range(1, cal.num_days + 1) if cal.is_friday(d)}
        for f in range(1, num_frac):
            coeffs = {y_idx[f + 1]: 1.0, y_idx[f]: -1.0}
            for (ff, _, d), j in q_idx.items():
                if ff == f and d in fridays:
                    coeffs[j] = coeffs.get(j, 0.0) + 1.0
            model.add_constr("rest-day[%d]" % f, coeffs, GE, 2.0)

    if kind is TreatmentKind.FIVE_PER_WEEK:
        for group, members in groups:
            for d in range(1, cal.num_days):
                for f in range(1, num_frac):
                    coeffs = dict(group_frac_on(members, f, d))
                    for j, v in group_frac_on(members, f + 1, d + 1).items():
                        coeffs[j] = coeffs.get(j, 0.0) - v
                    if coeffs:
                        model.add_constr(
                            "daily-chain[%s,%d,%d]" % (min(group), d, f), coeffs, EQ, 0.0
                        )

    if kind is TreatmentKind.TBI:
        model.add_constr(
            "span-three-days", {y_idx[num_frac]: 1.0, y_idx[1]: -1.0}, EQ, 2.0
        )

    # minimum fractions per strictly-intermediate week of the course: the
    # count in week g must reach the minimum whenever the course started
    # in an earlier week (the start-sum hits 1) and finishes in a later
    # week (the finish-sum hits 1); with at most one of them set the row
    # relaxes to a tautology
    if num_frac > 5 and kind in (TreatmentKind.CONVENTIONAL, TreatmentKind.EVERY_OTHER_DAY):
        f_min = float(protocol.min_per_week)
        for g in cal.weeks():
            if g == 1 or g == cal.num_weeks:
                continue
            starts_before = [
                j for (f, _, d), j in q_idx.items() if f == 1 and cal.week_of(d) < g
            ]
            ends_after = [
                j
                for (f, _, d), j in q_idx.items()
                if f == num_frac and cal.week_of(d) > g
            ]
            if not starts_before or not ends_after:
                continue
            coeffs: dict[int, float] = {}
            for (f, m, d), j in q_idx.items():
                if cal.week_of(d) == g:
                    coeffs[j] = coeffs.get(j, 0.0) + 1.0
            for j in starts_before:
                coeffs[j] = coeffs.get(j, 0.0) - f_min
            for j in ends_after:
                coeffs[j] = coeffs.get(j, 0.0) - f_min
            model.add_constr("week-minimum[%d]" % g, coeffs, GE, -f_min)

    # objective pieces that need their own variables
    if 2 not in mask:
        z_days = range(max(1, eff - 1), cal.num_days)
        for d in z_days:
            zj = model.add_var("z[%d]" % d, lb=0, ub=1, obj=float(weights.window_switch), integer=True)
            for w in range(1, NUM_WINDOWS + 1):
                here = {j: 1.0 for (m, dd, ww), j in x_idx.items() if dd == d and ww == w}
                there = {j: 1.0 for (m, dd, ww), j in x_idx.items() if dd == d + 1 and ww == w}
                if not here and not there:
                    continue
                coeffs = dict(here)
                for j, v in there.items():
                    coeffs[j] = coeffs.get(j, 0.0) - v
                coeffs[zj] = -1.0
                model.add_constr("switch-lb1[%d,%d]" % (d, w), coeffs, LE, 0.0)
                coeffs = {j: -v for j, v in here.items()}
                for j, v in there.items():
                    coeffs[j] = coeffs.get(j, 0.0) + v
                coeffs[zj] = -1.0
                model.add_constr("switch-lb2[%d,%d]" % (d, w), coeffs, LE, 0.0)
        # only switches inside the course span are charged; the entry and
        # exit transitions picked up by the rows above cancel out exactly:
        # within = total - 2 + [start == 1] + [end == last day]
        for m in machines:
            if (1, m, 1) in q_idx:
                model.add_obj(q_idx[(1, m, 1)], float(weights.window_switch))
            if (num_frac, m, cal.num_days) in q_idx:
                model.add_obj(
                    q_idx[(num_frac, m, cal.num_days)], float(weights.window_switch)
                )
        model.add_var(
            "switch-base",
            lb=1,
            ub=1,
            obj=-2.0 * weights.window_switch,
            integer=False,
        )

    if 3 not in mask and window_pref is not None:
        for (m, d, w), j in x_idx.items():
            if w != window_pref:
                model.add_obj(j, float(weights.window_preference))

    if 5 not in mask and num_frac > 1:
        classes: dict[frozenset[str], list[str]] = {}
        for m in machines:
            cls = topo.complete_class_of(m)
            classes.setdefault(cls, []).append(m)
        for f in range(1, num_frac):
            sj = model.add_var(
                "s[%d]" % f, lb=0, ub=1, obj=float(weights.machine_switch), integer=True
            )
            for cls, members in sorted(classes.items(), key=lambda kv: min(kv[0])):
                coeffs = {}
                for m in members:
                    for d in range(1, cal.num_days + 1):
                        if (f, m, d) in q_idx:
                            coeffs[q_idx[(f, m, d)]] = coeffs.get(q_idx[(f, m, d)], 0.0) + 1.0
                        if (f + 1, m, d) in q_idx:
                            j = q_idx[(f + 1, m, d)]
                            coeffs[j] = coeffs.get(j, 0.0) - 1.0
                if coeffs:
                    coeffs[sj] = -1.0
                    model.add_constr(
                        "switch-machines[%d,%s]" % (f, min(cls)), coeffs, LE, 0.0
                    )

    if 7 not in mask:
        oj = model.add_var("o", lb=0, ub=float(cal.num_days), obj=float(weights.excess_days), integer=True)
        coeffs = {oj: -1.0}
        if num_frac > 1:
            coeffs[y_idx[num_frac]] = 1.0
            coeffs[y_idx[1]] = -1.0
        model.add_constr("stretch", coeffs, LE, float(num_frac))

    return PricingModel(
        model, patient, instance, duals, link_role, weights, mask, q_idx, x_idx, t_idx
    )


def reduced_cost(
    column: ScheduleColumn,
    patient: Patient,
    instance: Instance,
    duals: DualPrices,
    link_role: LinkRole = None,
    weights: CostWeights = DEFAULT_WEIGHTS,
    masked_terms: frozenset[int] | None = None,
) -> float:
    """Price a finished column against the master duals, from scratch."""
    mask = _patient_mask(patient, masked_terms)
    cost = column_cost(column, patient, instance, weights=weights, masked_terms=mask)
    value = float(cost) - duals.assignment_of(patient.id)
    for cell, minutes in column_footprint(column, patient).items():
        value -= duals.capacity_of(cell) * minutes
    if link_role is not None:
        role, index = link_role
        eta = float(duals.link_lo.get(index, 0.0))
        xi = float(duals.link_hi.get(index, 0.0))
        if role == "primary":
            value -= (eta - xi) * column.end_day
        elif role == "secondary":
            value -= (xi - eta) * column.start_day
        else:
            raise ValueError("unknown link role %r" % (role,))
    return value


def solve_pricing(
    built: PricingModel,
    time_limit: float | None = None,
    relaxation_screen: bool = False,
) -> PricingResult:
    """Solve a built subproblem and return the best negative column, if any.

    With ``relaxation_screen`` the LP relaxation runs first: when even its
    value prices out non-negative, no integer point can do better and the
    integer solve is skipped.  The screened result carries the relaxation
    bound as its reduced cost and no objective, so callers that need the
    exact integer optimum must leave the screen off.
    """
    patient = built.patient
    lam = built.duals.assignment_of(patient.id)
    if built.model.infeasible_reason is not None:
        return PricingResult(IpStatus.INFEASIBLE, None, None, None)
    if relaxation_screen:
        rel = solve_lp(built.model)
        if rel.ok and rel.objective - lam >= -EPS_RC:
            return PricingResult(IpStatus.OPTIMAL, None, rel.objective - lam, None)
    res = solve_ip(built.model, time_limit=time_limit, presolve=False)
    if res.status is IpStatus.INFEASIBLE:
        return PricingResult(IpStatus.INFEASIBLE, None, None, None)
    if res.status is IpStatus.TIMEOUT or res.x is None:
        return PricingResult(IpStatus.TIMEOUT, None, None, None)
    column = built.extract_column(res.x)
    rc_model = res.objective - lam
    rc_exact = reduced_cost(
        column,
        patient,
        built.instance,
        built.duals,
        built.link_role,
        built.weights,
        built.masked_terms,
    )
    if abs(rc_model - rc_exact) > 1e-5:
        raise KernelError(
            "subproblem price drift for %s: model %.9f vs recomputed %.9f"
            % (patient.id, rc_model, rc_exact)
        )
    if rc_exact < -EPS_RC:
        return PricingResult(res.status, column, rc_exact, res.objective)
    return PricingResult(res.status, None, rc_exact, res.objective)


def price_patient(
    patient: Patient,
    instance: Instance,
    duals: DualPrices,
    link_role: LinkRole = None,
    time_limit: float | None = None,
    weights: CostWeights = DEFAULT_WEIGHTS,
    masked_terms: frozenset[int] | None = None,
    relaxation_screen: bool = False,
) -> PricingResult:
    built = build_pricing_model(patient, instance, duals, link_role, weights, masked_terms)
    return solve_pricing(built, time_limit=time_limit, relaxation_screen=relaxation_screen)
