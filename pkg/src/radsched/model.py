"""Domain model: machines, protocols, patients, schedules, occupancy.

Everything downstream (validator, pricing, master, heuristic, simulator)
works against these types. `Instance.validate` is the single gate that
guarantees cross-references resolve and the base occupancy fits the
window capacities.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Iterator, Mapping

from .calendars import Calendar, WindowLayout
from .errors import InstanceError


class Priority(str, Enum):
    A = "A"
    B = "B"
    C = "C"

    @property
    def weight(self) -> int:
        """Urgency weight multiplying the waiting-time cost term."""
        return _PRIORITY_WEIGHTS[self]


_PRIORITY_WEIGHTS = {Priority.A: 10, Priority.B: 3, Priority.C: 1}


class TreatmentKind(str, Enum):
    CONVENTIONAL = "conventional"
    EVERY_OTHER_DAY = "every-other-day"
    FIVE_PER_WEEK = "five-per-week"
    TBI = "tbi"


class StartDayRule(str, Enum):
    ANY = "any"
    NOT_FRIDAY = "not-friday"
    MONDAY = "monday"


@dataclass(frozen=True)
class MachineTopology:
    """Machine fleet with its site / beam / completeness partitions.

    beam_groups partition the fleet (beam-matched machines a patient may
    move between mid-course). complete_groups list machines that are
    interchangeable without any plan adaptation; machines not listed
    form implicit singleton classes. unavailable maps machine id to the
    weekday indices it is closed (planned maintenance).
    """

    machines: tuple[str, ...]
    sites: Mapping[str, str]
    beam_groups: tuple[frozenset[str], ...]
    complete_groups: tuple[frozenset[str], ...] = ()
    unavailable: Mapping[str, frozenset[int]] = field(default_factory=dict)

    def validate(self, calendar: Calendar) -> None:
        problems: list[str] = []
        fleet = set(self.machines)
        if len(fleet) != len(self.machines):
            problems.append("duplicate machine ids")
        if set(self.sites) != fleet:
            problems.append("sites mapping must cover exactly the fleet")
        covered: set[str] = set()
        for group in self.beam_groups:
            if covered & group:
                problems.append(f"beam groups overlap at {sorted(covered & group)}")
            covered |= group
        if covered != fleet:
            problems.append("beam groups must partition the fleet")
        seen: set[str] = set()
        for group in self.complete_groups:
            if not group <= fleet:
                problems.append(f"complete group {sorted(group)} outside fleet")
            if seen & group:
                problems.append("complete groups overlap")
            seen |= group
            owners = {self.beam_group_of(m) for m in group if m in fleet}
            if len(owners) > 1:
                problems.append(
                    f"complete group {sorted(group)} spans beam groups"
                )
        for machine, days in self.unavailable.items():
            if machine not in fleet:
                problems.append(f"unavailability for unknown machine {machine}")
                continue
            bad = [d for d in days if not calendar.contains(d)]
            if bad:
                problems.append(f"unavailable days outside horizon on {machine}: {sorted(bad)}")
        if problems:
            raise InstanceError("; ".join(problems))

    def beam_group_of(self, machine: str) -> frozenset[str]:
        for group in self.beam_groups:
            if machine in group:
                return group
        raise KeyError(f"machine {machine} not in any beam group")

    def complete_class_of(self, machine: str) -> frozenset[str]:
        for group in self.complete_groups:
            if machine in group:
                return group
        return frozenset((machine,))

    def site_of(self, machine: str) -> str:
        return self.sites[machine]

    def machines_at(self, site: str) -> tuple[str, ...]:
        return tuple(m for m in self.machines if self.sites[m] == site)

    def is_unavailable(self, machine: str, day: int) -> bool:
        return day in self.unavailable.get(machine, frozenset())

    def unavailable_days(self, machine: str) -> frozenset[str]:
        return self.unavailable.get(machine, frozenset())


def derive_unavailable_weeks(
    topology: MachineTopology, calendar: Calendar
) -> dict[frozenset[str], frozenset[int]]:
    """Weeks in which a beam group has any planned machine closure.

    A week is 'unavailability-affected' for a group as soon as one
    member machine is closed on one day of that week; gap rules relax
    only in such weeks.
    """
    out: dict[frozenset[str], frozenset[int]] = {}
    for group in topology.beam_groups:
        weeks: set[int] = set()
        for machine in group:
            for day in topology.unavailable.get(machine, frozenset()):
                if calendar.contains(day):
                    weeks.add(calendar.week_of(day))
        out[group] = frozenset(weeks)
    return out


@dataclass(frozen=True)
class Protocol:
    """Clinical scheduling profile shared by patients of one diagnosis.

    preferred_machines and allowed_machines are disjoint; the machines a
    course may use at all is their union (eligible_machines). Fractions
    on the allowed-but-not-preferred part carry a cost penalty.
    """

    id: str
    priority: Priority
    min_per_week: int
    min_days_from_ct: int
    preferred_machines: frozenset[str]
    allowed_machines: frozenset[str]
    start_rule: StartDayRule = StartDayRule.ANY
    kind: TreatmentKind = TreatmentKind.CONVENTIONAL

    @property
    def eligible_machines(self) -> frozenset[str]:
        return self.preferred_machines | self.allowed_machines

    def validate(self, topology: MachineTopology) -> None:
        problems: list[str] = []
        fleet = set(topology.machines)
        if self.preferred_machines & self.allowed_machines:
            problems.append("preferred and allowed machine sets must be disjoint")
        if not self.eligible_machines <= fleet:
            problems.append("eligible machines outside fleet")
        if not self.eligible_machines:
            problems.append("no eligible machines")
        if self.min_days_from_ct < 0:
            problems.append("min_days_from_ct negative")
        if self.kind is TreatmentKind.TBI:
            if self.min_per_week != 6:
                problems.append("tbi protocols run six fractions per week")
            if self.start_rule is not StartDayRule.MONDAY:
                problems.append("tbi protocols start on Mondays")
        elif self.kind is TreatmentKind.FIVE_PER_WEEK:
            if self.min_per_week != 5:
                problems.append("five-per-week protocols have min 5 per week")
            if self.start_rule is not StartDayRule.MONDAY:
                problems.append("five-per-week protocols start on Mondays")
        elif self.kind is TreatmentKind.EVERY_OTHER_DAY:
            if not 1 <= self.min_per_week <= 3:
                problems.append("every-other-day spacing caps the week at 3 fractions")
        elif not 1 <= self.min_per_week <= 5:
            problems.append("min_per_week outside 1..5")
        if problems:
            raise InstanceError(f"protocol {self.id}: " + "; ".join(problems))


@dataclass(frozen=True)
class Patient:
    """One treatment course to be placed on the calendar.

    earliest_start is the medical earliest start day (anchors the
    waiting-time cost). release_day, when set, further bounds the first
    fraction from below without moving the cost anchor; the simulator
    uses it so bookings never start on the solve day itself.
    """

    id: str
    protocol_id: str
    num_fractions: int
    dur_first: int
    dur_rest: int
    arrival_day: int
    ct_day: int
    earliest_start: int
    release_day: int | None = None
    window_preference: int | None = None
    site_preference: str | None = None
    is_placeholder: bool = False

    @property
    def effective_earliest(self) -> int:
        if self.release_day is None:
            return self.earliest_start
        return max(self.earliest_start, self.release_day)

    def validate(self, instance: "Instance") -> None:
        problems: list[str] = []
        protocol = instance.protocols.get(self.protocol_id)
        if protocol is None:
            raise InstanceError(f"patient {self.id}: unknown protocol {self.protocol_id}")
        cal = instance.calendar
        if self.num_fractions < 1:
            problems.append("needs at least one fraction")
        if protocol.kind is TreatmentKind.FIVE_PER_WEEK and self.num_fractions != 5:
            problems.append("five-per-week courses have exactly 5 fractions")
        if protocol.kind is TreatmentKind.TBI and self.num_fractions != 6:
            problems.append("tbi courses have exactly 6 fractions")
        if protocol.kind is TreatmentKind.EVERY_OTHER_DAY and self.num_fractions > 1:
            pass  # spacing feasibility is the solver's concern
        if not self.dur_first >= self.dur_rest > 0:
            problems.append("need dur_first >= dur_rest > 0 minutes")
        if self.arrival_day < 1:
            problems.append("arrival day before horizon")
        if self.ct_day < self.arrival_day:
            problems.append("ct day precedes arrival")
        if not cal.contains(self.earliest_start):
            problems.append(f"earliest start {self.earliest_start} outside horizon")
        if self.release_day is not None and self.release_day < 1:
            problems.append("release day before horizon")
        if self.window_preference is not None and not 1 <= self.window_preference <= 4:
            problems.append("window preference outside 1..4")
        if self.site_preference is not None:
            sites = set(instance.topology.sites.values())
            if self.site_preference not in sites:
                problems.append(f"unknown site {self.site_preference}")
        if problems:
            raise InstanceError(f"patient {self.id}: " + "; ".join(problems))


@dataclass(frozen=True)
class ConsecutiveLink:
    """Second course must start 1..3 days after the first one ends."""

    primary: str
    secondary: str


@dataclass(frozen=True)
class ScheduleColumn:
    """A complete course placement: one (machine, day, window) per fraction.

    assignments[f-1] is fraction f; the sequence is ordered by
    non-decreasing day. cost is the weighted objective contribution as
    computed by the validator (integral by construction).
    """

    patient_id: str
    assignments: tuple[tuple[str, int, int], ...]
    cost: int

    @property
    def start_day(self) -> int:
        return self.assignments[0][1]

    @property
    def end_day(self) -> int:
        return self.assignments[-1][1]

    def fingerprint(self) -> tuple:
        return (self.patient_id, self.assignments)

    def days(self) -> tuple[int, ...]:
        return tuple(day for _, day, _ in self.assignments)


def column_footprint(
    column: ScheduleColumn, patient: Patient
) -> dict[tuple[str, int, int], int]:
    """Minutes the column consumes per (machine, day, window) cell.

    Fraction 1 books the first-fraction duration, the rest the repeat
    duration; contributions landing in the same cell accumulate.
    """
    footprint: dict[tuple[str, int, int], int] = {}
    for index, cell in enumerate(column.assignments):
        minutes = patient.dur_first if index == 0 else patient.dur_rest
        footprint[cell] = footprint.get(cell, 0) + minutes
    return footprint


class OccupancyGrid:
    """Mutable booked-minutes ledger per (machine, day, window) cell."""

    def __init__(self, minutes: Mapping[tuple[str, int, int], int] | None = None):
        self._minutes: dict[tuple[str, int, int], int] = {}
        if minutes:
            for cell, value in minutes.items():
                if value:
                    self._minutes[cell] = int(value)

    def minutes(self, machine: str, day: int, window: int) -> int:
        return self._minutes.get((machine, day, window), 0)

    def add(self, machine: str, day: int, window: int, amount: int) -> None:
        if amount < 0:
            raise ValueError("occupancy additions must be non-negative")
        key = (machine, day, window)
        self._minutes[key] = self._minutes.get(key, 0) + amount

    def add_footprint(self, footprint: Mapping[tuple[str, int, int], int]) -> None:
        for (machine, day, window), amount in footprint.items():
            self.add(machine, day, window, amount)

    def cells(self) -> Iterator[tuple[tuple[str, int, int], int]]:
        return iter(sorted(self._minutes.items()))

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self._minutes)

    def total_minutes(self) -> int:
        return sum(self._minutes.values())

    def as_dict(self) -> dict[tuple[str, int, int], int]:
        return dict(self._minutes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return self._minutes == other._minutes

    def validate(
        self, calendar: Calendar, windows: WindowLayout, topology: MachineTopology
    ) -> None:
        fleet = set(topology.machines)
        problems = []
        for (machine, day, window), value in self._minutes.items():
            if machine not in fleet:
                problems.append(f"occupancy on unknown machine {machine}")
            if not calendar.contains(day):
                problems.append(f"occupancy on day {day} outside horizon")
            if not 1 <= window <= 4:
                problems.append(f"occupancy in window {window} outside 1..4")
            if value < 0:
                problems.append("negative occupancy minutes")
            elif 1 <= window <= 4 and value > windows.length(window):
                problems.append(
                    f"cell ({machine},{day},{window}) holds {value} min "
                    f"over the {windows.length(window)} min window"
                )
        if problems:
            raise InstanceError("; ".join(problems))


@dataclass
class Instance:
    """A self-consistent scheduling problem over one horizon."""

    calendar: Calendar
    windows: WindowLayout
    topology: MachineTopology
    protocols: dict[str, Protocol]
    patients: dict[str, Patient]
    links: tuple[ConsecutiveLink, ...] = ()
    occupancy: OccupancyGrid = field(default_factory=OccupancyGrid)

    def __post_init__(self) -> None:
        self._unavailable_weeks: dict[frozenset[str], frozenset[int]] | None = None

    def validate(self) -> None:
        self.topology.validate(self.calendar)
        for protocol in self.protocols.values():
            if protocol.id not in self.protocols or self.protocols[protocol.id] is not protocol:
                raise InstanceError(f"protocol map key mismatch for {protocol.id}")
            protocol.validate(self.topology)
        for pid, patient in self.patients.items():
            if patient.id != pid:
                raise InstanceError(f"patient map key mismatch for {pid}")
            patient.validate(self)
        linked: set[str] = set()
        for link in self.links:
            for pid in (link.primary, link.secondary):
                if pid not in self.patients:
                    raise InstanceError(f"link references unknown patient {pid}")
                if pid in linked:
                    raise InstanceError(f"patient {pid} appears in more than one link")
                linked.add(pid)
            if link.primary == link.secondary:
                raise InstanceError("link joins a patient to itself")
        self.occupancy.validate(self.calendar, self.windows, self.topology)

    def protocol_of(self, patient: Patient | str) -> Protocol:
        pid = patient if isinstance(patient, str) else patient.protocol_id
        return self.protocols[pid]

    def unavailable_weeks(self) -> dict[frozenset[str], frozenset[int]]:
        if self._unavailable_weeks is None:
            self._unavailable_weeks = derive_unavailable_weeks(self.topology, self.calendar)
        return self._unavailable_weeks

    def free_week_for_group(self, group: frozenset[str], week: int) -> bool:
        """True when no machine of the group is closed during the week."""
        return week not in self.unavailable_weeks().get(group, frozenset())

    def site_machines(self, site: str) -> frozenset[str]:
        return frozenset(self.topology.machines_at(site))

    def allowed_start_days(self, patient: Patient) -> list[int]:
        """Days the first fraction may land on, in ascending order."""
        protocol = self.protocol_of(patient)
        days = []
        for day in range(patient.effective_earliest, self.calendar.num_days + 1):
            if protocol.start_rule is StartDayRule.NOT_FRIDAY and self.calendar.is_friday(day):
                continue
            if protocol.start_rule is StartDayRule.MONDAY and not self.calendar.is_monday(day):
                continue
            days.append(day)
        return days

    def with_patients(
        self,
        patients: dict[str, Patient],
        links: tuple[ConsecutiveLink, ...],
        occupancy: OccupancyGrid | None = None,
        calendar: Calendar | None = None,
        protocols: dict[str, Protocol] | None = None,
    ) -> "Instance":
        """Shallow variant used by the simulator's daily assembly."""
        return Instance(
            calendar=calendar or self.calendar,
            windows=self.windows,
            topology=self.topology,
            protocols=protocols if protocols is not None else self.protocols,
            patients=patients,
            links=links,
            occupancy=occupancy if occupancy is not None else self.occupancy,
        )


def compute_earliest_start(calendar: Calendar, ct_day: int, min_days_from_ct: int) -> int:
    """Medical earliest start: CT day plus lead time, clamped to the horizon."""
    return max(1, min(ct_day + min_days_from_ct, calendar.num_days))


def load_instance(document: Mapping) -> Instance:
    """Build and validate an Instance from a plain document (parsed JSON)."""
    try:
        calendar = Calendar(num_days=int(document["calendar"]["num_days"]))
        windows = WindowLayout(lengths=tuple(int(x) for x in document["windows"]))
        machines = [dict(m) for m in document["machines"]]
        topology = MachineTopology(
            machines=tuple(m["id"] for m in machines),
            sites={m["id"]: str(m["site"]) for m in machines},
            beam_groups=_groups_from(machines, "beam_group"),
            complete_groups=_groups_from(machines, "complete_group", optional=True),
            unavailable={
                m["id"]: frozenset(int(d) for d in m.get("unavailable_days", ()))
                for m in machines
            },
        )
        protocols: dict[str, Protocol] = {}
        for row in document["protocols"]:
            preferred = frozenset(str(m) for m in row["preferred_machines"])
            protocol = Protocol(
                id=str(row["id"]),
                priority=Priority(row["priority"]),
                min_per_week=int(row["min_per_week"]),
                min_days_from_ct=int(row["min_days_from_ct"]),
                preferred_machines=preferred,
                allowed_machines=frozenset(str(m) for m in row.get("allowed_machines", ()))
                - preferred,
                start_rule=StartDayRule(row.get("start_rule", "any")),
                kind=TreatmentKind(row.get("kind", "conventional")),
            )
            if protocol.id in protocols:
                raise InstanceError(f"duplicate protocol id {protocol.id}")
            protocols[protocol.id] = protocol
        patients: dict[str, Patient] = {}
        for row in document["patients"]:
            protocol = protocols.get(str(row["protocol"]))
            if protocol is None:
                raise InstanceError(f"patient {row['id']}: unknown protocol {row['protocol']}")
            ct_day = int(row["ct_day"])
            earliest = row.get("earliest_start")
            if earliest is None:
                earliest = compute_earliest_start(calendar, ct_day, protocol.min_days_from_ct)
            patient = Patient(
                id=str(row["id"]),
                protocol_id=protocol.id,
                num_fractions=int(row["num_fractions"]),
                dur_first=int(row["dur_first"]),
                dur_rest=int(row["dur_rest"]),
                arrival_day=int(row["arrival_day"]),
                ct_day=ct_day,
                earliest_start=int(earliest),
                release_day=(int(row["release_day"]) if row.get("release_day") is not None else None),
                window_preference=(
                    int(row["window_preference"])
                    if row.get("window_preference") is not None
                    else None
                ),
                site_preference=(
                    str(row["site_preference"])
                    if row.get("site_preference") is not None
                    else None
                ),
                is_placeholder=bool(row.get("is_placeholder", False)),
            )
            if patient.id in patients:
                raise InstanceError(f"duplicate patient id {patient.id}")
            patients[patient.id] = patient
        links = tuple(
            ConsecutiveLink(primary=str(row["primary"]), secondary=str(row["secondary"]))
            for row in document.get("links", ())
        )
        occupancy = OccupancyGrid(
            {
                (str(row["machine"]), int(row["day"]), int(row["window"])): int(row["minutes"])
                for row in document.get("occupancy", ())
            }
        )
    except InstanceError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceError(f"malformed instance document: {exc}") from exc
    instance = Instance(
        calendar=calendar,
        windows=windows,
        topology=topology,
        protocols=protocols,
        patients=patients,
        links=links,
        occupancy=occupancy,
    )
    instance.validate()
    return instance


def _groups_from(
    machines: Iterable[Mapping], key: str, optional: bool = False
) -> tuple[frozenset[str], ...]:
    by_label: dict[str, set[str]] = {}
    for machine in machines:
        label = machine.get(key)
        if label is None:
            if optional:
                continue
            raise InstanceError(f"machine {machine.get('id')} missing {key}")
        by_label.setdefault(str(label), set()).add(machine["id"])
    return tuple(frozenset(group) for _, group in sorted(by_label.items()))


def with_release(patient: Patient, release_day: int) -> Patient:
    return replace(patient, release_day=release_day)
