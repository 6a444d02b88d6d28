"""Exception hierarchy shared by the services and the command line.

Each error knows the process exit code the CLI should use:
0 all checks pass, 1 a mathematical check failed, 2 usage error.
"""

from typing import Any, Dict, List, Optional

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2


class ShdsError(Exception):
    exit_code: int = EXIT_USAGE


class UsageError(ShdsError):
    """Bad flags, unresolvable families, or arguments violating a documented precondition."""


class CapacityError(UsageError):
    pass


class PreconditionError(UsageError):
    pass


class ReducibleModulusError(UsageError):
    def __init__(self, modulus: List[int], factor: List[int]):
        self.modulus = list(modulus)
        self.factor = list(factor)
        super().__init__(
            f"modulus {self.modulus} is reducible over GF(3): "
            f"factor {self.factor} (constant term first)"
        )


class FieldDomainError(ShdsError, ArithmeticError):
    pass


class InvariantViolation(ShdsError, AssertionError):
    """A fact guaranteed by theory failed; `inputs` holds everything needed to reproduce it."""

    exit_code = EXIT_CHECK_FAILED

    def __init__(self, message: str, inputs: Optional[Dict[str, Any]] = None):
        self.inputs = dict(inputs or {})
        detail = f" inputs={self.inputs}" if self.inputs else ""
        super().__init__(f"{message}{detail}")
