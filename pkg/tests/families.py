"""Shared instance families for the test suite.

Two sizes are used throughout:

* tiny enumerable instances (a couple of machines, short horizons) where
  brute force is feasible and answers can be checked exactly;
* a fixed two-machine desk clinic for the simulation studies, sized so
  that near-term capacity is genuinely scarce and reservation strategies
  have something to trade.
"""

from __future__ import annotations

import random

from radsched.calendars import Calendar, WindowLayout
from radsched.model import (
    Instance,
    MachineTopology,
    OccupancyGrid,
    Patient,
    Priority,
    Protocol,
    StartDayRule,
)
from radsched.reservation import PlaceholderRow, PlaceholderSpec
from radsched.sim import ArrivalStream

DESK_SIM_DAYS = 40

_DESK_ROOMS = {"m1": (24, 12, 12, 12), "m2": (12, 12, 24, 12)}


def desk_clinic() -> Instance:
    """Two-machine clinic with a congested first five weeks.

    Existing bookings fill most of days 1..18 up front, leaving roughly
    120 free minutes per day across both machines, which is a bit more
    than the average daily arrival demand.  New bookings therefore
    compete for near-term minutes, which is exactly the regime where
    holding capacity back for urgent arrivals matters.  Three machine
    closure days add forced interruptions.
    """
    windows = WindowLayout((60, 60, 60, 60))
    topology = MachineTopology(
        machines=("m1", "m2"),
        sites={"m1": "s1", "m2": "s1"},
        beam_groups=(frozenset({"m1", "m2"}),),
        complete_groups=(),
        unavailable={"m1": frozenset({17, 18}), "m2": frozenset({33})},
    )
    protocols = {
        "a-urgent": Protocol(
            id="a-urgent",
            priority=Priority.A,
            min_per_week=1,
            min_days_from_ct=0,
            preferred_machines=frozenset({"m1", "m2"}),
            allowed_machines=frozenset(),
        ),
        "b-pall": Protocol(
            id="b-pall",
            priority=Priority.B,
            min_per_week=3,
            min_days_from_ct=1,
            preferred_machines=frozenset({"m1"}),
            allowed_machines=frozenset({"m2"}),
        ),
        "c-cur": Protocol(
            id="c-cur",
            priority=Priority.C,
            min_per_week=5,
            min_days_from_ct=2,
            preferred_machines=frozenset({"m1", "m2"}),
            allowed_machines=frozenset(),
        ),
    }
    grid = OccupancyGrid()
    for day in range(1, 19):
        for machine, rooms in _DESK_ROOMS.items():
            if day in topology.unavailable.get(machine, frozenset()):
                continue
            for window, room in zip(windows.windows(), rooms):
                grid.add(machine, day, window, windows.length(window) - room)
    instance = Instance(
        calendar=Calendar(num_days=90),
        windows=windows,
        topology=topology,
        protocols=protocols,
        patients={},
        links=(),
        occupancy=grid,
    )
    instance.validate()
    return instance


def desk_stream(seed: int, sim_days: int = DESK_SIM_DAYS) -> ArrivalStream:
    """Roughly one arrival per working day with the usual urgency mix."""
    rng = random.Random(seed)
    patients = []
    for day in range(1, sim_days + 1):
        count = sum(1 for _ in range(3) if rng.random() < 0.35)
        for _ in range(count):
            roll = rng.random()
            if roll < 0.37:
                proto, fractions, prep = "a-urgent", rng.randint(1, 3), 0
                dur_first = dur_rest = 24
            elif roll < 0.53:
                proto, fractions, prep = "b-pall", rng.randint(3, 5), rng.choice((0, 1))
                dur_first, dur_rest = 24, 12
            else:
                proto, fractions, prep = "c-cur", rng.randint(6, 9), rng.choice((1, 2))
                dur_first, dur_rest = 24, 12
            ct_day = day + prep
            lead = {"a-urgent": 0, "b-pall": 1, "c-cur": 2}[proto]
            patients.append(
                Patient(
                    id=f"d{day:02d}n{len(patients)}",
                    protocol_id=proto,
                    num_fractions=fractions,
                    dur_first=dur_first,
                    dur_rest=dur_rest,
                    arrival_day=day,
                    ct_day=ct_day,
                    earliest_start=ct_day + lead,
                )
            )
    return ArrivalStream(patients=tuple(patients), links=())


def desk_placeholder_spec(weeks_ahead: int = 4) -> PlaceholderSpec:
    """Expected-urgent roster matched to the desk clinic's arrival rate.

    Three week-long twelve-minute ghosts per week come to 180 reserved
    minutes, close to the urgent classes' expected demand; the per-week
    count is large enough that a one-sixth rate scaling actually changes
    the materialized roster.
    """
    return PlaceholderSpec(
        rows=(
            PlaceholderRow(
                name="a-ghost",
                per_week=3,
                min_per_week=5,
                dur_first=12,
                dur_rest=12,
                preferred_machines=frozenset({"m1", "m2"}),
                num_fractions=5,
                min_days_from_ct=0,
            ),
        ),
        weeks_ahead=weeks_ahead,
    )
