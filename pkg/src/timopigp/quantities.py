"""Physical quantity kinds handled by the multi-output beam model."""

from __future__ import annotations

import enum


class QuantityKind(enum.Enum):
    """The six beam-level quantities coupled by the covariance model.

    Strain observations additionally carry a depth ``z`` measured from the
    neutral axis; all other kinds are functions of the axial coordinate only.
    """

    DEFLECTION = "w"
    ROTATION = "phi"
    STRAIN = "eps"
    MOMENT = "M"
    SHEAR = "V"
    LOAD = "q"

    @property
    def code(self) -> str:
        """Short CSV/config identifier for this quantity."""
        return self.value

    @classmethod
    def from_code(cls, code: str) -> "QuantityKind":
        for kind in cls:
            if kind.value == code:
                return kind
        raise ValueError(f"unknown quantity code {code!r}; expected one of "
                         f"{[k.value for k in cls]}")


# Fixed block order of the joint covariance matrix.
BLOCK_ORDER = (
    QuantityKind.DEFLECTION,
    QuantityKind.ROTATION,
    QuantityKind.STRAIN,
    QuantityKind.MOMENT,
    QuantityKind.SHEAR,
    QuantityKind.LOAD,
)

BLOCK_INDEX = {kind: i for i, kind in enumerate(BLOCK_ORDER)}
