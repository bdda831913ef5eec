"""Exception types shared across the package."""

from __future__ import annotations

__all__ = ["NumericalFailure"]


class NumericalFailure(RuntimeError):
    """An iterative solver failed to reach its tolerance.

    Carries the last residual seen so callers can report how far the
    solve was from converging.
    """

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = float(residual)

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        base = super().__str__()
        if self.residual == self.residual:  # not NaN
            return f"{base} (residual {self.residual:.3e})"
        return base
