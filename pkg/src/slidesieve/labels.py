"""Impurity categories and per-image label sets."""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum


class ImpurityCategory(IntEnum):
    """The eight impurity classes. The integer value is the classifier
    output channel index, so order is load-bearing."""

    NARRATOR = 0
    DESKTOP_CHROME = 1
    TEXT_LOGO = 2
    ARROW_ANNOTATION = 3
    LOW_QUALITY = 4
    SLIDE_OVERVIEW = 5
    CONTROL_ELEMENTS = 6
    MULTI_PANEL = 7


N_CATEGORIES = len(ImpurityCategory)

CATEGORY_NAMES = [c.name.lower() for c in ImpurityCategory]


@dataclass(frozen=True)
class ImpurityLabelSet:
    """Eight boolean flags indexed by ImpurityCategory.

    ``any`` is always derived from the flags, never stored independently.
    """

    flags: tuple[bool, ...]

    def __post_init__(self):
        if len(self.flags) != N_CATEGORIES:
            raise ValueError(f"expected {N_CATEGORIES} flags, got {len(self.flags)}")
        object.__setattr__(self, "flags", tuple(bool(f) for f in self.flags))

    @property
    def any(self) -> bool:
        return any(self.flags)

    def __getitem__(self, category: ImpurityCategory) -> bool:
        return self.flags[int(category)]

    def with_flag(self, category: ImpurityCategory, value: bool = True) -> "ImpurityLabelSet":
        flags = list(self.flags)
        flags[int(category)] = value
        return ImpurityLabelSet(tuple(flags))

    def union(self, other: "ImpurityLabelSet") -> "ImpurityLabelSet":
        return ImpurityLabelSet(tuple(a or b for a, b in zip(self.flags, other.flags)))

    @classmethod
    def none(cls) -> "ImpurityLabelSet":
        return cls((False,) * N_CATEGORIES)

    @classmethod
    def single(cls, category: ImpurityCategory) -> "ImpurityLabelSet":
        return cls.none().with_flag(category, True)

    def to_list(self) -> list[bool]:
        return list(self.flags)
