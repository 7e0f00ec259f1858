"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: usage errors exit 2,
divergence exits 3, data mismatches exit 4.
"""


class ParseError(ValueError):
    """A text input file violates its format; message names the line."""

    def __init__(self, path: str, line_no: int, reason: str):
        self.path = path
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"{path}:{line_no}: {reason}")


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss; message names the step."""


class DataMismatchError(ValueError):
    """Inputs that must agree (dimensions, label ranges, language sets) do not."""
