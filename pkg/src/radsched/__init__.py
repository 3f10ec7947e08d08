"""Radiotherapy patient scheduling: column generation plus a rolling
daily simulation for comparing capacity-reservation strategies."""

__version__ = "1.0.0"

from .calendars import Calendar, WindowLayout
from .errors import (
    DocumentError,
    HeuristicError,
    InfeasibleColumnError,
    InstanceError,
    KernelError,
    RadschedError,
)
from .model import (
    ConsecutiveLink,
    Instance,
    MachineTopology,
    OccupancyGrid,
    Patient,
    Priority,
    Protocol,
    ScheduleColumn,
    StartDayRule,
    TreatmentKind,
    load_instance,
)
from .validate import (
    CostBreakdown,
    CostWeights,
    DEFAULT_WEIGHTS,
    Violation,
    check_column,
    check_master_solution,
    column_breakdown,
    column_cost,
)

__all__ = [
    "Calendar",
    "WindowLayout",
    "ConsecutiveLink",
    "Instance",
    "MachineTopology",
    "OccupancyGrid",
    "Patient",
    "Priority",
    "Protocol",
    "ScheduleColumn",
    "StartDayRule",
    "TreatmentKind",
    "load_instance",
    "CostBreakdown",
    "CostWeights",
    "DEFAULT_WEIGHTS",
    "Violation",
    "check_column",
    "check_master_solution",
    "column_breakdown",
    "column_cost",
    "RadschedError",
    "InstanceError",
    "KernelError",
    "InfeasibleColumnError",
    "HeuristicError",
    "DocumentError",
    "__version__",
]
