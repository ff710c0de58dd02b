from __future__ import annotations


class InputError(ValueError):
    """Invalid argument, file content or configuration."""


class OcvParseError(InputError):
    def __init__(self, message: str, *, line: int) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


class OcvValidationError(InputError):
    def __init__(self, message: str, *, knot: int) -> None:
        super().__init__(f"knot {knot}: {message}")
        self.knot = knot


class SocRangeError(InputError):
    ...


class CycleFormatError(InputError):
    def __init__(self, message: str, *, row: int) -> None:
        super().__init__(f"row {row}: {message}")
        self.row = row


class NumericalFailure(ArithmeticError):
    def __init__(self, message: str, *, step: int) -> None:
        super().__init__(f"step {step}: {message}")
        self.step = step
