"""Restricted master problem over a pool of candidate schedules.

One schedule per patient must be chosen (set partitioning), the chosen
schedules must jointly fit the remaining window capacity, and paired
courses must stay 1 to 3 days apart.  The LP relaxation supplies the
prices that drive the per-patient subproblems; the final integer pass
picks the booking from everything the pool has accumulated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import KernelError
from .milp import (
    EQ,
    LE,
    IpStatus,
    LinearModel,
    LpStatus,
    solve_ip,
    solve_lp,
)
from .model import Instance, ScheduleColumn, column_footprint
from .pricing import DualPrices

__all__ = [
    "ColumnPool",
    "RmpIndex",
    "MasterSolution",
    "FinalIpResult",
    "build_rmp",
    "solve_rmp_lp",
    "solve_final_ip",
]


class ColumnPool:
    """Deduplicated store of candidate schedules, grouped by patient."""

    def __init__(self) -> None:
        self.columns: list[ScheduleColumn] = []
        self._by_patient: dict[str, list[int]] = {}
        self._seen: set = set()

    def __len__(self) -> int:
        return len(self.columns)

    def add(self, column: ScheduleColumn) -> bool:
        key = column.fingerprint()
        if key in self._seen:
            return False
        self._seen.add(key)
        self._by_patient.setdefault(column.patient_id, []).append(len(self.columns))
        self.columns.append(column)
        return True

    def add_many(self, columns) -> int:
        return sum(1 for c in columns if self.add(c))

    def indices_of(self, patient_id: str) -> list[int]:
        return list(self._by_patient.get(patient_id, []))

    def of(self, patient_id: str) -> list[ScheduleColumn]:
        return [self.columns[i] for i in self._by_patient.get(patient_id, [])]

    def patients(self) -> list[str]:
        return sorted(self._by_patient)


@dataclass
class RmpIndex:
    """Row/variable bookkeeping for mapping LP duals back to prices."""

    var_of: dict[int, int] = field(default_factory=dict)  # pool idx -> var
    pool_of: dict[int, int] = field(default_factory=dict)  # var -> pool idx
    assign_row: dict[str, int] = field(default_factory=dict)
    cap_row: dict[tuple[str, int, int], int] = field(default_factory=dict)
    link_lo_row: dict[int, int] = field(default_factory=dict)
    link_hi_row: dict[int, int] = field(default_factory=dict)


@dataclass
class MasterSolution:
    status: LpStatus
    objective: float | None
    weights: dict[int, float]  # pool idx -> LP weight (only nonzeros)
    duals: DualPrices | None


@dataclass
class FinalIpResult:
    status: IpStatus
    objective: float | None
    selection: dict[str, ScheduleColumn]
    bound: float | None
    gap: float | None


def build_rmp(
    instance: Instance, pool: ColumnPool, integral: bool = False
) -> tuple[LinearModel, RmpIndex]:
    """Assemble the master over the pooled columns.

    Capacity rows are written only for cells some pooled column touches;
    untouched cells cannot be overfilled by any selection.  The selection
    variables are binaries in the integral pass; in the relaxation their
    upper bound is left open because the partition rows already imply
    weights of at most one, and an explicit bound would park dual value
    on the bound instead of on the rows the subproblems price against.
    """
    model = LinearModel("rmp" + ("-ip" if integral else ""))
    index = RmpIndex()

    footprints: dict[int, dict[tuple[str, int, int], int]] = {}
    for pid in sorted(instance.patients):
        patient = instance.patients[pid]
        pool_indices = pool.indices_of(pid)
        if not pool_indices:
            model.tag_infeasible("patient %s has no candidate schedule" % pid)
            return model, index
        for i in pool_indices:
            col = pool.columns[i]
            j = model.add_var(
                "a[%s,%d]" % (pid, i),
                lb=0,
                ub=1 if integral else float("inf"),
                obj=float(col.cost),
                integer=integral,
            )
            index.var_of[i] = j
            index.pool_of[j] = i
            footprints[i] = column_footprint(col, patient)

    for pid in sorted(instance.patients):
        coeffs = {index.var_of[i]: 1.0 for i in pool.indices_of(pid)}
        index.assign_row[pid] = model.add_constr("assign[%s]" % pid, coeffs, EQ, 1.0)

    touched: set[tuple[str, int, int]] = set()
    for fp in footprints.values():
        touched.update(fp)
    for cell in sorted(touched):
        m, d, w = cell
        coeffs = {}
        for i, fp in footprints.items():
            if cell in fp:
                coeffs[index.var_of[i]] = float(fp[cell])
        room = instance.windows.length(w) - instance.occupancy.minutes(m, d, w)
        index.cap_row[cell] = model.add_constr(
            "cap[%s,%d,%d]" % cell, coeffs, LE, float(room)
        )

    for c, link in enumerate(instance.links):
        if link.primary not in instance.patients or link.secondary not in instance.patients:
            continue
        lo = {}
        hi = {}
        for i in pool.indices_of(link.primary):
            j = index.var_of[i]
            lo[j] = float(pool.columns[i].end_day)
            hi[j] = -float(pool.columns[i].end_day)
        for i in pool.indices_of(link.secondary):
            j = index.var_of[i]
            lo[j] = -float(pool.columns[i].start_day)
            hi[j] = float(pool.columns[i].start_day)
        index.link_lo_row[c] = model.add_constr("link-lo[%d]" % c, lo, LE, -1.0)
        index.link_hi_row[c] = model.add_constr("link-hi[%d]" % c, hi, LE, 3.0)

    return model, index


def solve_rmp_lp(instance: Instance, pool: ColumnPool) -> MasterSolution:
    model, index = build_rmp(instance, pool, integral=False)
    if model.infeasible_reason is not None:
        return MasterSolution(LpStatus.INFEASIBLE, None, {}, None)
    res = solve_lp(model)
    if not res.ok:
        return MasterSolution(res.status, None, {}, None)
    weights = {}
    for j, i in index.pool_of.items():
        v = float(res.x[j])
        if v > 1e-9:
            weights[i] = v
    duals = DualPrices(
        assignment={pid: float(res.duals[r]) for pid, r in index.assign_row.items()},
        capacity={cell: float(res.duals[r]) for cell, r in index.cap_row.items()},
        link_lo={c: float(res.duals[r]) for c, r in index.link_lo_row.items()},
        link_hi={c: float(res.duals[r]) for c, r in index.link_hi_row.items()},
    )
    return MasterSolution(res.status, res.objective, weights, duals)


def solve_final_ip(
    instance: Instance,
    pool: ColumnPool,
    warm_start: dict[str, ScheduleColumn] | None = None,
    time_limit: float | None = None,
) -> FinalIpResult:
    model, index = build_rmp(instance, pool, integral=True)
    if model.infeasible_reason is not None:
        return FinalIpResult(IpStatus.INFEASIBLE, None, {}, None, None)
    warm = None
    if warm_start:
        warm = {}
        fingerprint_to_pool = {
            pool.columns[i].fingerprint(): i
            for pid in instance.patients
            for i in pool.indices_of(pid)
        }
        for pid, col in warm_start.items():
            i = fingerprint_to_pool.get(col.fingerprint())
            if i is None:
                warm = None
                break
            warm[index.var_of[i]] = 1.0
    res = solve_ip(model, time_limit=time_limit, warm_start=warm)
    if not res.ok:
        return FinalIpResult(res.status, None, {}, res.bound, res.gap)
    selection: dict[str, ScheduleColumn] = {}
    for j, i in index.pool_of.items():
        if res.x[j] > 0.5:
            col = pool.columns[i]
            if col.patient_id in selection:
                raise KernelError("two schedules picked for %s" % col.patient_id)
            selection[col.patient_id] = col
    missing = set(instance.patients) - set(selection)
    if missing:
        raise KernelError("no schedule picked for %s" % ", ".join(sorted(missing)))
    return FinalIpResult(res.status, res.objective, selection, res.bound, res.gap)
