"""
Error types for the cGAN path planner.
Every error carries a short machine code and the process exit code the CLI uses.
"""


class PlannerError(Exception):
    """Base class for all planner failures."""

    code = "error"
    exit_code = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class RangeError(PlannerError, ValueError):
    """Joint angles, latent points or obstacles outside their domain."""

    code = "range"
    exit_code = 3


class ShapeError(PlannerError, ValueError):
    """Tensor shapes that do not agree."""

    code = "shape"
    exit_code = 4


class UsageError(PlannerError):
    code = "usage"
    exit_code = 2


class ConfigError(PlannerError):
    code = "config"
    exit_code = 2


class DataError(PlannerError):
    """Unreadable or inconsistent scenario/dataset files."""

    code = "data"
    exit_code = 3


class GenerationError(DataError):
    code = "generation"


class ModelError(PlannerError):
    """Missing, corrupt or incompatible model checkpoints."""

    code = "model"
    exit_code = 4


class TrainingError(ModelError):
    code = "training"


class PlanningFailure(PlannerError):
    code = "planning"
    exit_code = 5
