"""Set-valued maps D_phi (sign, regu, clip, identity) as deterministic selections.

Every selection is a single-valued function of (input, tie policy, rng state).
The set-valuedness only shows up at zero coordinates (sign) or at the origin
(regu), where the tie policy decides which element of the set is returned.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import InvalidInputError, InvalidParameterError


class TiePolicy(str, Enum):
    """How a selection resolves coordinates where the set is not a singleton."""

    ZERO = "zero"
    POSITIVE = "positive"
    DIAGONAL = "diagonal"
    SEEDED_RANDOM = "seeded-random"


class PhiKind(str, Enum):
    HALF_SQUARE = "half-square"
    L1 = "l1"
    L2 = "l2"
    CLIP = "clip"


# Table of method -> potential used by the x-update.
METHOD_PHI = {
    "heavy-ball": PhiKind.HALF_SQUARE,
    "signsgd": PhiKind.L1,
    "lion": PhiKind.L1,
    "normalized": PhiKind.L2,
    "clipped": PhiKind.CLIP,
}

# Common value given to every zero coordinate under the diagonal policy.
DIAGONAL_VALUE = 1.0


def as_vector(m, name: str = "vector") -> np.ndarray:
    """
    Coerce input to a 1-D float64 array and reject non-finite entries.

    Args:
        m: array-like of reals
        name: label used in the error message

    Returns:
        1-D numpy array (a copy when conversion was needed)

    Raises:
        InvalidInputError: malformed or non-finite input
    """
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInputError(f"{name} must be a non-empty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def _require_rng(rng: Optional[np.random.Generator]) -> np.random.Generator:
    if rng is None:
        raise InvalidParameterError("seeded-random tie policy needs the run RNG")
    return rng


def sign_select(m, tie: TiePolicy = TiePolicy.ZERO, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    Select an element of sign(m), the Clarke subdifferential of ||.||_1 at m.

    Nonzero coordinates map to their sign. Zero coordinates get 0 (zero),
    1 (positive), the shared diagonal value (diagonal) or a uniform draw on
    [-1, 1] from ``rng`` (seeded-random).

    Raises:
        InvalidInputError: non-finite input
    """
    m = as_vector(m, "m")
    tie = TiePolicy(tie)
    out = np.sign(m)
    zeros = m == 0.0
    if not zeros.any():
        return out
    if tie is TiePolicy.POSITIVE:
        out[zeros] = 1.0
    elif tie is TiePolicy.DIAGONAL:
        out[zeros] = DIAGONAL_VALUE
    elif tie is TiePolicy.SEEDED_RANDOM:
        out[zeros] = _require_rng(rng).uniform(-1.0, 1.0, size=int(zeros.sum()))
    else:
        out[zeros] = 0.0
    return out


def regu_select(m, tie: TiePolicy = TiePolicy.ZERO, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    Select an element of regu(m): m/||m|| off the origin, a point of the unit ball at it.

    Raises:
        InvalidInputError: non-finite input
    """
    m = as_vector(m, "m")
    tie = TiePolicy(tie)
    norm = np.linalg.norm(m)
    if norm > 0.0:
        return m / norm
    n = m.size
    if tie in (TiePolicy.POSITIVE, TiePolicy.DIAGONAL):
        return np.full(n, 1.0 / np.sqrt(n))
    if tie is TiePolicy.SEEDED_RANDOM:
        draw = _require_rng(rng).uniform(-1.0, 1.0, size=n)
        draw_norm = np.linalg.norm(draw)
        return draw / draw_norm if draw_norm > 1.0 else draw
    return np.zeros(n)


def clip_select(m, C: float) -> np.ndarray:
    """
    Coordinate-wise clamp of m to [-C, C].

    Raises:
        InvalidParameterError: C <= 0
        InvalidInputError: non-finite input
    """
    if not C > 0.0:
        raise InvalidParameterError(f"clip level must be positive, got {C}")
    m = as_vector(m, "m")
    return np.minimum(np.maximum(m, -C), C)


def identity_select(m) -> np.ndarray:
    """D_phi selection for phi = 0.5 ||m||^2."""
    return as_vector(m, "m").copy()


def clip_potential(m, C: float) -> float:
    """Sum of the clip potential: 0.5 x^2 for |x| <= C, C|x| - 0.5 C^2 outside."""
    if not C > 0.0:
        raise InvalidParameterError(f"clip level must be positive, got {C}")
    a = np.abs(as_vector(m, "m"))
    inner = 0.5 * a * a
    outer = C * a - 0.5 * C * C
    return float(np.sum(np.where(a <= C, inner, outer)))


@dataclass(frozen=True)
class PhiChoice:
    """
    Potential function phi together with its selection oracle for D_phi.

    Attributes:
        kind: which potential (half-square, l1, l2, clip)
        C: clip level, only meaningful for kind=clip
        tie: tie policy for the sign/regu selections
    """

    kind: PhiKind = PhiKind.HALF_SQUARE
    C: Optional[float] = None
    tie: TiePolicy = TiePolicy.ZERO

    def __post_init__(self):
        object.__setattr__(self, "kind", PhiKind(self.kind))
        object.__setattr__(self, "tie", TiePolicy(self.tie))
        if self.kind is PhiKind.CLIP and (self.C is None or not self.C > 0.0):
            raise InvalidParameterError(f"clip potential needs a positive C, got {self.C}")

    @classmethod
    def from_method(cls, method: str, C: Optional[float] = None, tie: TiePolicy = TiePolicy.ZERO) -> "PhiChoice":
        """Build the potential the named method uses for its x-update."""
        if method not in METHOD_PHI:
            raise InvalidParameterError(f"unknown method {method!r}")
        kind = METHOD_PHI[method]
        return cls(kind=kind, C=C if kind is PhiKind.CLIP else None, tie=tie)

    def value(self, m) -> float:
        """Evaluate phi(m) exactly."""
        return phi_value(m, self)

    def select(self, m, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        """Return the configured element of D_phi(m)."""
        if self.kind is PhiKind.HALF_SQUARE:
            return identity_select(m)
        if self.kind is PhiKind.L1:
            return sign_select(m, self.tie, rng)
        if self.kind is PhiKind.L2:
            return regu_select(m, self.tie, rng)
        return clip_select(m, self.C)


def phi_value(m, choice: PhiChoice) -> float:
    """
    Evaluate the potential phi(m) for a PhiChoice.

    Args:
        m: momentum vector
        choice: which potential

    Returns:
        phi(m) as a float
    """
    m = as_vector(m, "m")
    if choice.kind is PhiKind.HALF_SQUARE:
        return 0.5 * float(np.dot(m, m))
    if choice.kind is PhiKind.L1:
        return float(np.sum(np.abs(m)))
    if choice.kind is PhiKind.L2:
        return float(np.linalg.norm(m))
    return clip_potential(m, choice.C)


def select(m, choice: PhiChoice, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    return choice.select(m, rng)
