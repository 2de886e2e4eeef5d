"""
tfem/errors.py
Exception hierarchy shared by the library and the CLI.
Each error carries the process exit code the CLI reports for it.
"""


class TfemError(Exception):
    """Base error. `kind` is the machine-readable name written on stderr."""

    exit_code = 1
    kind = "error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def to_dict(self) -> dict:
        return {"error": self.kind, "exit_code": self.exit_code, "message": self.message}


class ShapeError(TfemError, ValueError):
    kind = "shape"


class PreconditionError(TfemError, ValueError):
    kind = "precondition"


class DegenerateInputError(TfemError, ArithmeticError):
    kind = "degenerate"


class ParameterError(TfemError, ValueError):
    exit_code = 2
    kind = "parameter"


class ConfigError(TfemError, ValueError):
    exit_code = 2
    kind = "config"


class FeasibilityError(TfemError, RuntimeError):
    exit_code = 3
    kind = "infeasible"


class FitError(TfemError, RuntimeError):
    exit_code = 3
    kind = "fit"


class ConstructionError(TfemError, RuntimeError):
    exit_code = 3
    kind = "construction"


class ConditioningError(TfemError, RuntimeError):
    exit_code = 3
    kind = "conditioning"


class ArtifactIOError(TfemError, OSError):
    exit_code = 4
    kind = "io"
