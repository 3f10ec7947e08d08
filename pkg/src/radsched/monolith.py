"""Joint integer program over every patient of an instance.

Solving all courses in one model is the brute-force counterpart of the
column-generation loop: each patient contributes the same constraint
block the pricing subproblem uses, and shared rows tie the blocks
together through cell capacity and consecutive-course spacing.  It only
scales to modest clinics, which is exactly its job: an independent
optimum to hold the decomposition against.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping

from .colgen import _sees_raw_capacity
from .reservation import shadow_instance
from .errors import KernelError
from .milp import LE, IpStatus, LinearModel, solve_ip
from .model import Instance, ScheduleColumn
from .pricing import DualPrices, PricingModel, build_pricing_model
from .validate import DEFAULT_WEIGHTS, CostWeights, check_master_solution

log = logging.getLogger(__name__)

Cell = tuple[str, int, int]


@dataclass(frozen=True)
class JointResult:
    """Outcome of the all-patients model.

    ``objective`` is recomputed from the extracted schedules, so it is
    trustworthy even for an unproven incumbent; ``bound`` is the solver's
    lower bound (equal to the objective when status is OPTIMAL).
    """

    status: IpStatus
    objective: float | None
    columns: dict[str, ScheduleColumn] = field(default_factory=dict)
    bound: float | None = None
    gap: float | None = None


def build_joint_model(
    instance: Instance,
    blocked: Mapping[Cell, int] | None = None,
    weights: CostWeights = DEFAULT_WEIGHTS,
) -> tuple[LinearModel, dict[str, tuple[PricingModel, int, int]]]:
    """Assemble the joint model and the per-patient slice directory.

    Returns the model plus, for each patient id, the built block and the
    (offset, width) of its variable slice.  Reserved minutes bind the
    non-urgent blocks only; the shared capacity rows keep true loads, the
    same split the decomposition applies.
    """
    shadow = shadow_instance(instance, blocked)
    joint = LinearModel("joint[%d]" % len(instance.patients))
    blocks: dict[str, tuple[PricingModel, int, int]] = {}
    for pid in sorted(instance.patients):
        patient = instance.patients[pid]
        base = instance if _sees_raw_capacity(instance, pid) else shadow
        built = build_pricing_model(
            patient, base, DualPrices.zero(), link_role=None, weights=weights
        )
        width = built.model.num_vars
        offset = joint.merge_from(built.model, prefix=pid + ".")
        blocks[pid] = (built, offset, width)

    # shared cell capacity against true loads
    cells: set[Cell] = set()
    for built, _, _ in blocks.values():
        cells.update(built.x_idx)
    for cell in sorted(cells):
        m, d, w = cell
        coeffs: dict[int, float] = {}
        for built, offset, _ in blocks.values():
            j = built.x_idx.get(cell)
            if j is None:
                continue
            pat = built.patient
            coeffs[offset + j] = float(pat.dur_rest)
            k = built.t_idx.get(cell)
            if k is not None:
                coeffs[offset + k] = float(pat.dur_first - pat.dur_rest)
        room = instance.windows.length(w) - instance.occupancy.minutes(m, d, w)
        joint.add_constr("cap[%s,%d,%d]" % cell, coeffs, LE, float(room))

    # spacing between the halves of a consecutive pair: the follow-up
    # course starts one to three days after the first one ends
    for c, link in enumerate(instance.links):
        if link.primary not in blocks or link.secondary not in blocks:
            continue
        built1, off1, _ = blocks[link.primary]
        built2, off2, _ = blocks[link.secondary]
        last = built1.patient.num_fractions
        lo: dict[int, float] = {}
        hi: dict[int, float] = {}
        for (f, _m, d), j in built1.q_idx.items():
            if f == last:
                lo[off1 + j] = float(d)
                hi[off1 + j] = -float(d)
        for (f, _m, d), j in built2.q_idx.items():
            if f == 1:
                lo[off2 + j] = lo.get(off2 + j, 0.0) - float(d)
                hi[off2 + j] = hi.get(off2 + j, 0.0) + float(d)
        joint.add_constr("link-lo[%d]" % c, lo, LE, -1.0)
        joint.add_constr("link-hi[%d]" % c, hi, LE, 3.0)

    return joint, blocks


def solve_joint(
    instance: Instance,
    blocked: Mapping[Cell, int] | None = None,
    weights: CostWeights = DEFAULT_WEIGHTS,
    time_limit: float | None = None,
) -> JointResult:
    """Solve every course at once and return validator-checked schedules."""
    joint, blocks = build_joint_model(instance, blocked=blocked, weights=weights)
    log.info(
        "joint model: %d patients, %d vars, %d rows",
        len(blocks),
        joint.num_vars,
        joint.num_constrs,
    )
    res = solve_ip(joint, time_limit=time_limit)
    if not res.ok:
        return JointResult(res.status, None, {}, res.bound, None)

    columns: dict[str, ScheduleColumn] = {}
    for pid, (built, offset, width) in blocks.items():
        columns[pid] = built.extract_column(res.x[offset : offset + width])
    violations = check_master_solution(columns, instance)
    if violations:
        raise KernelError(
            "joint solution fails validation: %s" % "; ".join(str(v) for v in violations)
        )

    objective = float(sum(col.cost for col in columns.values()))
    if res.status is IpStatus.OPTIMAL and abs(objective - res.objective) > 1e-5:
        raise KernelError(
            "joint objective %.6f disagrees with recomputed cost %.6f"
            % (res.objective, objective)
        )
    gap = None
    if res.bound is not None:
        gap = max(0.0, objective - res.bound) / max(1.0, abs(objective))
    return JointResult(res.status, objective, columns, res.bound, gap)
