"""Edge labels and their progression order."""

from __future__ import annotations

import enum


class Label(enum.Enum):
    TRUNK = "Trunk"
    SUPPORT = "Support"
    LEADER = "Leader"
    SIDE_BRANCH = "SideBranch"
    NONE = "None"

    @property
    def order(self) -> int:
        """Progression order; undefined (raises) for NONE."""
        try:
            return _ORDER[self]
        except KeyError:
            raise ValueError("Order is undefined for Label.NONE") from None

    def __str__(self) -> str:
        return self.value


_ORDER = {
    Label.TRUNK: 0,
    Label.SUPPORT: 1,
    Label.LEADER: 2,
    Label.SIDE_BRANCH: 3,
}

#: The labels assignable during skeleton growth and post-processing.
STRUCTURAL_LABELS = (Label.TRUNK, Label.SUPPORT, Label.LEADER)

#: Fixed palette for colored exports: label -> (r, g, b).
LABEL_COLORS = {
    Label.TRUNK: (140, 70, 20),
    Label.SUPPORT: (220, 60, 60),
    Label.LEADER: (60, 120, 220),
    Label.SIDE_BRANCH: (60, 200, 60),
}


def parse_label(name: str) -> Label:
    for label in Label:
        if label.value == name:
            return label
    raise ValueError(f"unknown label {name!r}")
