"""Weekday calendar arithmetic and treatment-window layout.

Days are 1-based weekday indices: day 1 is a Monday, weekends do not
exist in the index space. Weeks are consecutive blocks of five days
(the last week of a horizon may be short).
"""

from __future__ import annotations

from dataclasses import dataclass

DAYS_PER_WEEK = 5


@dataclass(frozen=True)
class Calendar:
    """A horizon of `num_days` weekdays, day 1 = Monday."""

    num_days: int

    def __post_init__(self) -> None:
        if self.num_days < 1:
            raise ValueError("calendar needs at least one day")

    @property
    def num_weeks(self) -> int:
        return (self.num_days + DAYS_PER_WEEK - 1) // DAYS_PER_WEEK

    def days(self) -> range:
        return range(1, self.num_days + 1)

    def weeks(self) -> range:
        return range(1, self.num_weeks + 1)

    def contains(self, day: int) -> bool:
        return 1 <= day <= self.num_days

    def week_of(self, day: int) -> int:
        if not self.contains(day):
            raise ValueError(f"day {day} outside horizon 1..{self.num_days}")
        return (day - 1) // DAYS_PER_WEEK + 1

    def monday_of(self, week: int) -> int:
        if not 1 <= week <= self.num_weeks:
            raise ValueError(f"week {week} outside horizon")
        return DAYS_PER_WEEK * (week - 1) + 1

    def days_of_week(self, week: int) -> range:
        start = self.monday_of(week)
        return range(start, min(start + DAYS_PER_WEEK, self.num_days + 1))

    def is_friday(self, day: int) -> bool:
        # day 5, 10, 15, ... ; a short final week has no Friday.
        if not self.contains(day):
            raise ValueError(f"day {day} outside horizon 1..{self.num_days}")
        return day % DAYS_PER_WEEK == 0

    def is_monday(self, day: int) -> bool:
        if not self.contains(day):
            raise ValueError(f"day {day} outside horizon 1..{self.num_days}")
        return day % DAYS_PER_WEEK == 1


NUM_WINDOWS = 4


@dataclass(frozen=True)
class WindowLayout:
    """Per-day time windows; `lengths[w-1]` is window w's capacity in minutes.

    Exactly four windows: the double-fraction rule pins the first and
    last window, so the window count is part of the model.
    """

    lengths: tuple[int, int, int, int]

    def __post_init__(self) -> None:
        if len(self.lengths) != NUM_WINDOWS:
            raise ValueError(f"expected {NUM_WINDOWS} window lengths")
        if any(m <= 0 for m in self.lengths):
            raise ValueError("window lengths must be positive minutes")

    def windows(self) -> range:
        return range(1, NUM_WINDOWS + 1)

    def length(self, window: int) -> int:
        if not 1 <= window <= NUM_WINDOWS:
            raise ValueError(f"window {window} outside 1..{NUM_WINDOWS}")
        return self.lengths[window - 1]
