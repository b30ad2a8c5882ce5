"""Exact rational arithmetic and tolerance-based comparison modes.

Every stop/continue classification in this package rests on an inequality
between a payoff and a continuation value, and several of the interesting
instances sit within 1e-3 of the decision boundary.  The default mode
therefore keeps all quantities as `fractions.Fraction` and compares exactly.
An alternate float mode runs the same algorithms on floats and routes each
classification through a configurable tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Sequence, Union

Scalar = Union[Fraction, float]


class NumericError(ValueError):
    """Malformed numeric input, such as a bad rational literal."""


class SingularSystemError(ArithmeticError):
    """A linear system required by a solver has no unique solution."""


def parse_rational(value: Union[str, int, Fraction]) -> Fraction:
    """Parse a rational literal such as ``"1/3"``, ``"0.4"`` or ``"-2"``.

    Decimal strings are read exactly: ``"0.4"`` becomes ``2/5``.  Floats are
    rejected so that inexact values cannot slip into exact computations.
    """
    if isinstance(value, bool):
        raise NumericError(f"not a number: {value!r}")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise NumericError(f"bad rational literal {value!r}: {exc}") from None
    raise NumericError(f"expected a rational string, got {type(value).__name__}")


def format_scalar(value: Scalar) -> str:
    """Render a scalar as a rational string (``"2/5"``) or float repr."""
    if isinstance(value, (Fraction, int)) and not isinstance(value, bool):
        return str(Fraction(value))
    return repr(float(value))


def decimal_render(value: Scalar, digits: int = 12) -> str:
    """Decimal rendering to a fixed number of significant digits."""
    if isinstance(value, Fraction):
        with localcontext() as ctx:
            ctx.prec = digits
            quotient = Decimal(value.numerator) / Decimal(value.denominator)
        return str(quotient)
    return f"{float(value):.{digits}g}"


@dataclass(frozen=True)
class NumericMode:
    """Comparison policy: exact rational order, or float order with tolerance.

    ``scale`` lets callers widen the tolerance proportionally to the size of
    the quantities being compared (used when verifying value processes).
    """

    exact: bool = True
    eps: float = 1e-9

    def coerce(self, value: Scalar) -> Scalar:
        if self.exact:
            return parse_rational(value)
        if isinstance(value, str):
            return float(parse_rational(value))
        return float(value)

    @property
    def zero(self) -> Scalar:
        return Fraction(0) if self.exact else 0.0

    @property
    def one(self) -> Scalar:
        return Fraction(1) if self.exact else 1.0

    def tolerance(self, scale: Scalar = 1) -> float:
        if self.exact:
            return 0.0
        return self.eps * max(1.0, abs(float(scale)))

    def compare(self, a: Scalar, b: Scalar, scale: Scalar = 1) -> int:
        """Return -1, 0 or +1 for a < b, a == b, a > b under this mode."""
        if self.exact:
            if a < b:
                return -1
            return 1 if a > b else 0
        diff = float(a) - float(b)
        tol = self.tolerance(scale)
        if diff > tol:
            return 1
        if diff < -tol:
            return -1
        return 0

    def eq(self, a: Scalar, b: Scalar, scale: Scalar = 1) -> bool:
        return self.compare(a, b, scale) == 0

    def lt(self, a: Scalar, b: Scalar, scale: Scalar = 1) -> bool:
        return self.compare(a, b, scale) < 0

    def le(self, a: Scalar, b: Scalar, scale: Scalar = 1) -> bool:
        return self.compare(a, b, scale) <= 0

    def gt(self, a: Scalar, b: Scalar, scale: Scalar = 1) -> bool:
        return self.compare(a, b, scale) > 0

    def ge(self, a: Scalar, b: Scalar, scale: Scalar = 1) -> bool:
        return self.compare(a, b, scale) >= 0


EXACT = NumericMode()


def float_mode(eps: float = 1e-9) -> NumericMode:
    return NumericMode(exact=False, eps=eps)


def solve_linear(matrix: Sequence[Sequence[Scalar]], rhs: Sequence[Scalar]) -> list[Scalar]:
    """Solve a small dense linear system by Gaussian elimination with pivoting.

    Works over Fractions (exactly) and floats alike.  Raises
    SingularSystemError when no unique solution exists.
    """
    n = len(rhs)
    rows = [list(row) + [rhs[i]] for i, row in enumerate(matrix)]
    if any(len(row) != n + 1 for row in rows):
        raise ValueError("matrix shape does not match right-hand side")
    for col in range(n):
        pivot_row = max(range(col, n), key=lambda r: abs(rows[r][col]))
        if rows[pivot_row][col] == 0:
            raise SingularSystemError(f"singular at column {col}")
        if pivot_row != col:
            rows[col], rows[pivot_row] = rows[pivot_row], rows[col]
        pivot = rows[col][col]
        for r in range(n):
            if r == col:
                continue
            factor = rows[r][col]
            if factor == 0:
                continue
            scale = factor / pivot
            for c in range(col, n + 1):
                rows[r][c] -= scale * rows[col][c]
    return [rows[i][n] / rows[i][i] for i in range(n)]
