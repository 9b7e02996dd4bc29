"""Exception types and the global intermediate-size cap."""

from __future__ import annotations

import os

DEFAULT_SIZE_CAP = 10**8


class TnarchError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(TnarchError, ValueError):
    """Input violates a structural or shape contract."""


class SizeLimitError(TnarchError):
    """A tensor (result or intermediate) would exceed the configured entry cap."""


class BoundViolation(TnarchError):
    """A computed rank exceeded its proven min-cut upper bound."""


def size_cap() -> int:
    """Entry cap for any tensor we allocate; ``TNARCH_SIZE_CAP`` overrides the default."""
    raw = os.environ.get("TNARCH_SIZE_CAP")
    if raw is None:
        return DEFAULT_SIZE_CAP
    try:
        cap = int(float(raw))
    except ValueError as exc:
        raise ValidationError(f"TNARCH_SIZE_CAP must be an integer, got {raw!r}") from exc
    if cap < 1:
        raise ValidationError("TNARCH_SIZE_CAP must be positive")
    return cap


def check_size(shape, what: str, cap: int | None = None) -> int:
    n = 1
    for d in shape:
        n *= int(d)
    limit = size_cap() if cap is None else cap
    if n > limit:
        raise SizeLimitError(f"{what} would hold {n} entries (shape {tuple(shape)}), cap is {limit}")
    return n
