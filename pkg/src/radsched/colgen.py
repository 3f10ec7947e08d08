"""Column generation driver for one scheduling batch.

The loop: seed the pool with complete heuristic schedules, then
alternate the restricted master LP with per-patient subproblem solves
until a full pricing sweep produces nothing new, and finish with one
integer pass over the pool.  No branching on fractional masters, and
no dual stabilization; the pool plus one IP is the whole story.

Subproblem selection is throttled: the first sweep and every third
sweep price every patient, the sweeps in between revisit only the
patients whose previous solve still priced out negative.  Termination
is only ever declared on a full sweep.

Budget handling is deliberately coarse.  The construction heuristic
always runs to completion because its schedules are the feasibility
backstop; the LP/pricing loop stops at its share of the budget; the
final integer pass gets the larger of its reserved share and whatever
is left.  With the default one-hour budget none of this binds on
desk-size instances, so repeated runs take identical paths.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Mapping

from .errors import KernelError
from .heuristic import HeuristicConfig, generate_initial
from .master import ColumnPool, solve_final_ip, solve_rmp_lp
from .milp import EPS_RC, IpStatus
from .model import Instance, ScheduleColumn
from .pricing import DualPrices, LinkRole, price_patient
from .reservation import shadow_instance
from .validate import CostWeights, DEFAULT_WEIGHTS, check_master_solution

__all__ = [
    "CgConfig",
    "CgReport",
    "BatchResult",
    "PricingState",
    "pricing_round",
    "solve_daily",
]

log = logging.getLogger("radsched.colgen")

Cell = tuple[str, int, int]


@dataclass(frozen=True)
class CgConfig:
    """Knobs for one batch solve."""

    budget_seconds: float = 3600.0
    num_initial: int = 50
    full_pricing_period: int = 3
    max_iterations: int = 1000
    seed: int = 0
    heuristic_share: float = 0.05
    final_ip_share: float = 0.20

    def validate(self) -> None:
        if self.budget_seconds <= 0:
            raise ValueError("budget must be positive")
        if self.full_pricing_period < 1:
            raise ValueError("full pricing period must be at least 1")
        if self.num_initial < 1:
            raise ValueError("need at least one initial schedule")
        if self.max_iterations < 1:
            raise ValueError("need at least one pricing iteration")
        for share in (self.heuristic_share, self.final_ip_share):
            if not 0.0 < share < 1.0:
                raise ValueError("budget shares live strictly inside (0, 1)")


@dataclass
class CgReport:
    """What one batch solve did, for logging and gap studies.

    Wall-clock figures are excluded from equality so that two runs with
    the same seed compare equal even though their timings differ.
    """

    iterations: int
    columns_generated: int
    bound_trajectory: tuple[float, ...]
    final_objective: float | None
    gap: float | None
    timed_out: bool
    phase_seconds: dict[str, float] = field(default_factory=dict, compare=False)


@dataclass
class BatchResult:
    """One day's answer: a complete schedule plus solve diagnostics."""

    status: str  # "optimal" | "budget" | "fallback"
    selection: dict[str, ScheduleColumn]
    objective: float
    lp_bound: float | None
    pool: ColumnPool
    report: CgReport


class PricingState:
    """Sweep counter and active set for the subproblem-selection policy."""

    def __init__(self, period: int = 3):
        if period < 1:
            raise ValueError("period must be at least 1")
        self.period = period
        self.iteration = 0
        self.active: set[str] = set()
        self.last_was_full = False

    def next_targets(self, all_patients: list[str]) -> tuple[list[str], bool]:
        """Advance the counter and say who gets priced this sweep.

        The second return value says whether the sweep covers every
        patient.  Only such a sweep can certify that no negative column
        exists; it arises on the periodic full iterations, whenever the
        active set drained, and whenever the active set happens to hold
        every patient anyway.
        """
        self.iteration += 1
        full = (self.iteration - 1) % self.period == 0 or not self.active
        targets = list(all_patients) if full else sorted(self.active)
        covers_all = len(targets) == len(all_patients)
        self.last_was_full = covers_all
        return targets, covers_all


def _link_roles(instance: Instance) -> dict[str, LinkRole]:
    roles: dict[str, LinkRole] = {}
    for c, link in enumerate(instance.links):
        if link.primary in instance.patients and link.secondary in instance.patients:
            roles[link.primary] = ("primary", c)
            roles[link.secondary] = ("secondary", c)
    return roles


def _course_shape(patient) -> tuple:
    """Everything that shapes an unlinked subproblem besides the id.

    Two patients with equal shapes have identical pricing models; only
    the partition dual differs, and that enters the reduced cost as a
    constant.  One solve then serves the whole cohort.
    """
    return (
        patient.protocol_id,
        patient.num_fractions,
        patient.dur_first,
        patient.dur_rest,
        patient.earliest_start,
        patient.effective_earliest,
        patient.window_preference,
        patient.site_preference,
        patient.is_placeholder,
    )


def pricing_round(
    instance: Instance,
    pool: ColumnPool,
    duals: DualPrices,
    state: PricingState,
    weights: CostWeights = DEFAULT_WEIGHTS,
    shadow: Instance | None = None,
    deadline: float | None = None,
) -> list[ScheduleColumn]:
    """Run one sweep of subproblems and pool the new negative columns.

    Unlinked patients with identical course shapes share one solve: the
    representative is the member with the largest partition dual, so its
    reduced cost is the cohort minimum, and the found schedule is simply
    rebadged for every member that prices out negative.

    A patient stays on the active list only while its latest solve
    produced a column the pool had not seen; a negative duplicate is
    numerical noise and drops the patient until the next full sweep.
    Returns the freshly pooled columns.
    """
    roles = _link_roles(instance)
    targets, full = state.next_targets(sorted(instance.patients))

    cohort_of: dict[tuple, list[str]] = {}
    for pid in targets:
        if roles.get(pid) is None:
            cohort_of.setdefault(_course_shape(instance.patients[pid]), []).append(pid)

    fresh: list[ScheduleColumn] = []
    handled: set[str] = set()
    for pid in targets:
        if pid in handled:
            continue
        if deadline is not None and time.monotonic() >= deadline:
            # an interrupted sweep certifies nothing; drop the full flag
            state.last_was_full = False
            break
        patient = instance.patients[pid]
        base = instance
        if shadow is not None and not _sees_raw_capacity(instance, pid):
            base = shadow

        if roles.get(pid) is not None:
            members = [pid]
            rep = patient
        else:
            members = cohort_of[_course_shape(patient)]
            rep = max(
                (instance.patients[m] for m in members),
                key=lambda p: (duals.assignment_of(p.id), p.id),
            )
        result = price_patient(
            rep,
            base,
            duals,
            link_role=roles.get(pid),
            weights=weights,
            relaxation_screen=True,
        )
        if result.status is IpStatus.INFEASIBLE:
            raise KernelError("subproblem for %s became infeasible" % rep.id)
        lam_rep = duals.assignment_of(rep.id)
        for member in members:
            handled.add(member)
            state.active.discard(member)
            if result.column is None:
                continue
            rc = result.reduced_cost + lam_rep - duals.assignment_of(member)
            if rc >= -EPS_RC:
                continue
            column = ScheduleColumn(
                member, result.column.assignments, result.column.cost
            )
            if pool.add(column):
                state.active.add(member)
                fresh.append(column)
    log.info(
        "pricing sweep %d (%s): %d/%d patients, %d new columns",
        state.iteration,
        "full" if full else "active",
        len(targets),
        len(instance.patients),
        len(fresh),
    )
    return fresh


def _sees_raw_capacity(instance: Instance, pid: str) -> bool:
    """Urgent patients plan against true loads even when time is reserved."""
    protocol = instance.protocol_of(instance.patients[pid])
    return protocol.priority.name == "A"


def solve_daily(
    instance: Instance,
    config: CgConfig = CgConfig(),
    blocked: Mapping[Cell, int] | None = None,
    weights: CostWeights = DEFAULT_WEIGHTS,
) -> BatchResult:
    """Solve one batch: every patient of the instance gets a schedule.

    ``blocked`` carries reserved minutes per cell; they bind the
    heuristic and the lower-priority subproblems but never the master
    rows.  The result is deterministic for a fixed seed whenever the
    budget does not interrupt the loop.
    """
    config.validate()
    start = time.monotonic()
    phase: dict[str, float] = {}

    shadow = shadow_instance(instance, blocked)
    shadow_arg = shadow if shadow is not instance else None

    heuristic = generate_initial(
        instance,
        config=HeuristicConfig(num_schedules=config.num_initial, seed=config.seed),
        blocked=dict(blocked) if blocked else None,
        weights=weights,
    )
    pool = heuristic.pool
    backstop = heuristic.best_schedule()
    backstop_cost = float(min(heuristic.schedule_costs))
    phase["heuristic"] = time.monotonic() - start
    log.info(
        "heuristic: %d schedules, %d distinct columns, best cost %.0f",
        config.num_initial,
        len(pool),
        backstop_cost,
    )

    loop_deadline = start + (1.0 - config.final_ip_share) * config.budget_seconds
    hard_deadline = start + config.budget_seconds
    state = PricingState(config.full_pricing_period)
    trajectory: list[float] = []
    generated = 0
    timed_out = False
    lp_value: float | None = None

    if time.monotonic() >= hard_deadline:
        # nothing beyond the backstop fits in the budget
        report = CgReport(0, 0, (), backstop_cost, None, True, phase)
        return BatchResult("fallback", backstop, backstop_cost, None, pool, report)

    loop_start = time.monotonic()
    while state.iteration < config.max_iterations:
        master = solve_rmp_lp(instance, pool)
        if master.duals is None:
            raise KernelError(
                "master relaxation failed (%s) with a complete pool" % master.status
            )
        lp_value = master.objective
        trajectory.append(float(master.objective))
        log.info("iteration %d: master LP %.3f", state.iteration + 1, master.objective)
        if time.monotonic() >= loop_deadline:
            timed_out = True
            break
        fresh = pricing_round(
            instance,
            pool,
            master.duals,
            state,
            weights=weights,
            shadow=shadow_arg,
            deadline=loop_deadline,
        )
        generated += len(fresh)
        if not fresh and state.last_was_full:
            break
        if not fresh and time.monotonic() >= loop_deadline:
            timed_out = True
            break
    else:
        timed_out = True
    phase["loop"] = time.monotonic() - loop_start

    ip_start = time.monotonic()
    ip_limit = max(
        config.final_ip_share * config.budget_seconds, hard_deadline - ip_start
    )
    final = solve_final_ip(instance, pool, warm_start=backstop, time_limit=ip_limit)
    phase["final-ip"] = time.monotonic() - ip_start

    if final.status not in (IpStatus.OPTIMAL, IpStatus.FEASIBLE):
        # the warm start makes this unreachable short of an engine defect;
        # the complete heuristic schedule is still a valid answer
        report = CgReport(
            state.iteration, generated, tuple(trajectory), backstop_cost, None, True, phase
        )
        return BatchResult("fallback", backstop, backstop_cost, lp_value, pool, report)

    problems = check_master_solution(final.selection, instance)
    if problems:
        raise KernelError(
            "final selection fails validation: "
            + "; ".join(str(v) for v in problems[:5])
        )

    objective = float(final.objective)
    gap = None
    if lp_value is not None:
        gap = max(0.0, objective - lp_value) / max(1.0, abs(lp_value))
    status = "budget" if timed_out else "optimal"
    if final.status is IpStatus.FEASIBLE:
        status = "budget"
    report = CgReport(
        iterations=state.iteration,
        columns_generated=generated,
        bound_trajectory=tuple(trajectory),
        final_objective=objective,
        gap=gap,
        timed_out=timed_out,
        phase_seconds=phase,
    )
    log.info(
        "batch done: %s, objective %.0f, LP bound %s, %d columns",
        status,
        objective,
        "%.3f" % lp_value if lp_value is not None else "n/a",
        len(pool),
    )
    return BatchResult(status, final.selection, objective, lp_value, pool, report)
