"""Synthetic clinic and arrival-stream generator.

No real patient data ships with this package; everything the solver and
simulator consume can be sampled from a configuration instead.  The
full-size preset mirrors a ten-machine, four-site network; the compact
preset is a three-machine clinic sized for tests and quick experiments.
All sampling goes through one ``random.Random`` so a (config, seed)
pair always reproduces the same stream.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from typing import Sequence

from .calendars import Calendar, WindowLayout
from .errors import InstanceError
from .model import (
    ConsecutiveLink,
    Instance,
    MachineTopology,
    OccupancyGrid,
    Patient,
    Priority,
    Protocol,
    StartDayRule,
    TreatmentKind,
)
from .reservation import PlaceholderRow, PlaceholderSpec


@dataclass(frozen=True)
class ProtocolTemplate:
    """One diagnosis the generator can draw, with its sampling ranges."""

    protocol: Protocol
    weight: float
    fractions: tuple[int, ...]
    dur_first: int
    dur_rest: int
    linkable: bool = False


@dataclass(frozen=True)
class GeneratorConfig:
    """Everything needed to sample instances and arrival streams."""

    topology: MachineTopology
    windows: WindowLayout
    templates: tuple[ProtocolTemplate, ...]
    arrivals_per_week: float = 96.0
    link_rate: float = 0.17
    window_pref_rate: float = 0.30
    site_pref_rate: float = 0.50
    ct_prep_days: tuple[int, ...] = (0, 1, 2)
    unavailable_day_share: float = 0.34

    def validate(self) -> None:
        if not self.templates:
            raise InstanceError("generator needs at least one protocol template")
        if self.arrivals_per_week <= 0:
            raise InstanceError("arrivals_per_week must be positive")
        for rate, name in (
            (self.link_rate, "link_rate"),
            (self.window_pref_rate, "window_pref_rate"),
            (self.site_pref_rate, "site_pref_rate"),
            (self.unavailable_day_share, "unavailable_day_share"),
        ):
            if not 0.0 <= rate < 1.0:
                raise InstanceError(f"{name} outside [0,1): {rate}")
        for t in self.templates:
            if t.weight <= 0 or not t.fractions:
                raise InstanceError(f"template {t.protocol.id}: empty weight or fractions")
            t.protocol.validate(self.topology)

    def protocols(self) -> dict[str, Protocol]:
        return {t.protocol.id: t.protocol for t in self.templates}

    def priority_mix(self) -> dict[Priority, float]:
        """Aggregate priority probabilities implied by the template weights."""
        total = sum(t.weight for t in self.templates)
        mix: dict[Priority, float] = {}
        for t in self.templates:
            p = t.protocol.priority
            mix[p] = mix.get(p, 0.0) + t.weight / total
        return mix


def _m(*names: str) -> frozenset[str]:
    return frozenset(names)


def iridium_like_config() -> GeneratorConfig:
    """Full-size preset: ten machines, four sites, mixed protocol case load.

    Template weights are tuned so priorities split roughly 37/16/46
    between A/B/C and about 9% of courses are non-conventional.
    """
    machines = tuple(f"M{i}" for i in range(1, 11))
    sites = {
        "M3": "S1", "M4": "S1", "M9": "S1", "M10": "S1",
        "M1": "S2", "M2": "S2",
        "M7": "S3", "M8": "S3",
        "M5": "S4", "M6": "S4",
    }
    topo = MachineTopology(
        machines=machines,
        sites=sites,
        beam_groups=(
            _m("M1", "M4", "M8"),
            _m("M9"),
            _m("M2", "M3", "M5", "M6", "M7", "M10"),
        ),
        complete_groups=(_m("M3", "M10"), _m("M5", "M6")),
    )
    t = ProtocolTemplate
    templates = (
        t(Protocol("palliative", Priority.A, 1, 0,
                   _m("M1", "M2", "M3", "M4", "M5", "M6", "M7", "M8"), _m("M10")),
          33.0, (1, 2, 3, 5, 10), 24, 24, linkable=True),
        t(Protocol("head_neck", Priority.A, 5, 11,
                   _m("M2", "M3", "M5", "M6", "M10"), _m("M1", "M4")),
          4.0, (30, 33, 35), 24, 12),
        t(Protocol("lung", Priority.B, 4, 9,
                   _m("M2", "M3", "M5", "M6", "M7", "M10"), _m("M1", "M4", "M8")),
          11.2, (25, 30, 33), 24, 12, linkable=True),
        t(Protocol("palliative_eod", Priority.B, 2, 0,
                   _m("M1", "M2", "M3", "M4", "M5", "M6", "M7", "M8"), _m("M10"),
                   kind=TreatmentKind.EVERY_OTHER_DAY),
          4.0, (5, 6, 8, 10), 24, 24),
        t(Protocol("tbi", Priority.B, 6, 5, _m("M5", "M6"), frozenset(),
                   start_rule=StartDayRule.MONDAY, kind=TreatmentKind.TBI),
          0.8, (6,), 40, 40),
        t(Protocol("breast", Priority.C, 3, 7,
                   _m("M1", "M4", "M5", "M6", "M8"), _m("M2", "M3", "M7", "M10")),
          22.0, (15, 16, 20), 24, 12, linkable=True),
        t(Protocol("prostate", Priority.C, 3, 9,
                   _m("M1", "M3", "M4", "M5", "M6", "M7", "M8"), _m("M2", "M10")),
          19.4, (20, 25, 28), 24, 12),
        t(Protocol("five_one_week", Priority.C, 5, 7,
                   _m("M1", "M4", "M5", "M6", "M8"), frozenset(),
                   start_rule=StartDayRule.MONDAY, kind=TreatmentKind.FIVE_PER_WEEK),
          4.6, (5,), 24, 12),
    )
    return GeneratorConfig(topology=topo, windows=WindowLayout((135, 120, 120, 135)),
                           templates=templates)


def compact_config() -> GeneratorConfig:
    """Three machines, two sites, short courses: sized for tests.

    Keeps every structural feature of the full preset (priorities,
    beam matching, sites, links, one non-conventional kind) at a scale
    where daily batches solve in seconds.
    """
    topo = MachineTopology(
        machines=("m1", "m2", "m3"),
        sites={"m1": "s1", "m2": "s1", "m3": "s2"},
        beam_groups=(_m("m1", "m2", "m3"),),
        complete_groups=(_m("m1", "m2"),),
    )
    t = ProtocolTemplate
    templates = (
        t(Protocol("urgent", Priority.A, 1, 0, _m("m1", "m2"), _m("m3")),
          37.0, (1, 2, 3), 24, 24, linkable=True),
        t(Protocol("pall", Priority.B, 3, 1, _m("m1", "m2", "m3"), frozenset()),
          12.0, (3, 4, 5), 24, 12, linkable=True),
        t(Protocol("pall_eod", Priority.B, 2, 1, _m("m1", "m2"), _m("m3"),
                   kind=TreatmentKind.EVERY_OTHER_DAY),
          4.0, (3, 4, 5), 24, 24),
        t(Protocol("curative", Priority.C, 5, 2, _m("m2", "m3"), _m("m1")),
          41.0, (6, 7, 8, 10), 24, 12, linkable=True),
        t(Protocol("five_short", Priority.C, 5, 2, _m("m1", "m2"), frozenset(),
                   start_rule=StartDayRule.MONDAY, kind=TreatmentKind.FIVE_PER_WEEK),
          5.0, (5,), 24, 12),
    )
    return GeneratorConfig(
        topology=topo,
        windows=WindowLayout((135, 120, 120, 135)),
        templates=templates,
        arrivals_per_week=10.0,
        unavailable_day_share=0.15,
    )


def compact_placeholder_spec(weeks_ahead: int = 4) -> PlaceholderSpec:
    """Dummy-demand roster matching the compact clinic's urgent stream.

    The compact preset expects about 10 arrivals per week of which 37%
    are urgent, so the roster carries 4 weekly urgent dummies.
    """
    return PlaceholderSpec(
        rows=(
            PlaceholderRow("u-short", 3, 1, 24, 24, _m("m1", "m2"), 2, 0),
            PlaceholderRow("u-long", 1, 1, 24, 24, _m("m1", "m2", "m3"), 3, 0),
        ),
        weeks_ahead=weeks_ahead,
    )


def _poisson(rng: random.Random, lam: float) -> int:
    if lam <= 0.0:
        return 0
    limit = math.exp(-lam)
    k = 0
    p = 1.0
    while True:
        p *= rng.random()
        if p <= limit:
            return k
        k += 1


def _minimal_span(kind: TreatmentKind, fractions: int) -> int:
    if kind is TreatmentKind.TBI:
        return 3
    if kind is TreatmentKind.FIVE_PER_WEEK:
        return 5
    if kind is TreatmentKind.EVERY_OTHER_DAY:
        return 2 * fractions - 1
    return fractions


def _earliest_feasible_start(protocol: Protocol, earliest: int) -> int:
    if protocol.start_rule is StartDayRule.MONDAY:
        return earliest + (5 - (earliest - 1) % 5) % 5
    return earliest


def _fits_horizon(protocol: Protocol, patient: Patient, num_days: int) -> bool:
    start = _earliest_feasible_start(protocol, patient.earliest_start)
    return start + _minimal_span(protocol.kind, patient.num_fractions) - 1 <= num_days


def sample_unavailability(
    config: GeneratorConfig, rng: random.Random, num_days: int
) -> dict[str, frozenset[int]]:
    """Closure days per machine.

    Per-machine daily closure probability is calibrated so the share of
    days with at least one closed machine approximates the configured
    density.
    """
    share = config.unavailable_day_share
    if share <= 0.0:
        return {}
    fleet = config.topology.machines
    per_machine = 1.0 - (1.0 - share) ** (1.0 / len(fleet))
    out: dict[str, frozenset[int]] = {}
    for m in fleet:
        days = frozenset(d for d in range(1, num_days + 1) if rng.random() < per_machine)
        if days:
            out[m] = days
    return out


def generate_arrivals(
    config: GeneratorConfig, seed: int, num_days: int
) -> tuple[list[Patient], list[ConsecutiveLink]]:
    """Sample a dated arrival stream (and its consecutive-course pairs).

    Arrival days are weekdays 1..num_days; each day draws a Poisson
    count at the configured weekly rate.  A linkable course spawns a
    shorter follow-up course arriving the same day, coupled through a
    ConsecutiveLink.
    """
    config.validate()
    rng = random.Random(seed)
    weights = [t.weight for t in config.templates]
    sites = sorted(set(config.topology.sites.values()))
    patients: list[Patient] = []
    links: list[ConsecutiveLink] = []

    def build(pid: str, template: ProtocolTemplate, day: int, fractions: int) -> Patient:
        proto = template.protocol
        ct = day + rng.choice(config.ct_prep_days)
        return Patient(
            id=pid,
            protocol_id=proto.id,
            num_fractions=fractions,
            dur_first=template.dur_first,
            dur_rest=template.dur_rest,
            arrival_day=day,
            ct_day=ct,
            earliest_start=ct + proto.min_days_from_ct,
            window_preference=(rng.randint(1, 4)
                               if rng.random() < config.window_pref_rate else None),
            site_preference=(rng.choice(sites)
                             if rng.random() < config.site_pref_rate else None),
        )

    for day in range(1, num_days + 1):
        count = _poisson(rng, config.arrivals_per_week / 5.0)
        for i in range(count):
            template = rng.choices(config.templates, weights=weights)[0]
            pid = f"p{day:03d}-{i}"
            fractions = rng.choice(template.fractions)
            patient = build(pid, template, day, fractions)
            patients.append(patient)
            if template.linkable and rng.random() < config.link_rate:
                follow = build(pid + "b", template, day,
                               min(fractions, rng.randint(2, 5)))
                patients.append(follow)
                links.append(ConsecutiveLink(pid, pid + "b"))
    return patients, links


def generate_instance(
    config: GeneratorConfig, seed: int, num_days: int
) -> Instance:
    """One self-contained batch instance over an empty grid.

    Arrivals whose course cannot end inside the horizon are dropped, so
    short horizons skew toward short courses; meant for demos and
    solver studies, not for distribution estimates on tiny calendars.
    """
    config.validate()
    patients, links = generate_arrivals(config, seed, num_days)
    closures = sample_unavailability(config, random.Random(seed + 1), num_days)
    topo = replace(config.topology, unavailable=closures)
    protocols = config.protocols()
    kept: dict[str, Patient] = {}
    for pat in patients:
        if _fits_horizon(protocols[pat.protocol_id], pat, num_days):
            kept[pat.id] = pat
    kept_links = tuple(
        l for l in links if l.primary in kept and l.secondary in kept
    )
    # a follow-up course needs room after its primary ends; drop pairs
    # whose combined span cannot fit even back to back
    final_links = []
    for l in kept_links:
        a, b = kept[l.primary], kept[l.secondary]
        pa, pb = protocols[a.protocol_id], protocols[b.protocol_id]
        start = _earliest_feasible_start(pa, a.earliest_start)
        span = (_minimal_span(pa.kind, a.num_fractions) + 1
                + _minimal_span(pb.kind, b.num_fractions))
        if start + span - 1 <= num_days:
            final_links.append(l)
        else:
            del kept[l.secondary]
    cal = Calendar(num_days)
    inst = Instance(cal, config.windows, topo, protocols, kept,
                    tuple(final_links), OccupancyGrid())
    inst.validate()
    return inst
