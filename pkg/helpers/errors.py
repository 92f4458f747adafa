"""
Toolchain Exceptions

Every error the toolchain raises derives from ToolchainError so the command
layer can map it onto the exit-code contract in one place.
"""


class ToolchainError(Exception):
    """Base class for all toolchain errors."""


class FuelError(ToolchainError, ValueError):
    """A run was requested with less than one step of fuel."""


class FieldOverflowError(ToolchainError, ValueError):
    """An address field does not fit its bit width."""

    def __init__(self, field: str, value: int, bits: int):
        self.field = field
        self.value = value
        self.bits = bits
        super().__init__(f"{field}={value:#x} does not fit in {bits} bits")


class ReservedComponentError(ToolchainError, ValueError):
    """Component 0 belongs to the runtime and has no sandbox constants."""


class ParseError(ToolchainError):
    """Syntax error in an IR or assembly text, annotated with its position."""

    def __init__(self, message: str, line: int, column: int = 1, source: str = "<input>"):
        self.line = line
        self.column = column
        self.source = source
        super().__init__(f"{source}:{line}:{column}: {message}")


class FormatVersionError(ToolchainError):
    """A file carries a format name or version this toolchain does not read."""


class LayoutError(ToolchainError):
    """Compilation failed while laying out code or data."""

    def __init__(self, kind: str, message: str):
        self.kind = kind
        super().__init__(f"{kind}: {message}")


class MetaMismatchError(ToolchainError):
    """A log refers to code addresses the layout metadata does not cover."""


class InjectionError(ToolchainError, ValueError):
    """An attack injection targets something other than data memory."""


class ShrinkError(ToolchainError, ValueError):
    """Shrinking was asked to reduce a program that does not fail."""


class ProgramInvalidError(ToolchainError):
    """The compiler was handed an IR program that fails validation."""

    def __init__(self, errors: list):
        self.errors = errors
        super().__init__(f"{len(errors)} well-formedness error(s), first: {errors[0]}")
