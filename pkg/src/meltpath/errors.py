"""Exception types shared across the toolkit.

The CLI maps these onto exit codes (config 2, numeric 3, format 4).
"""


class ConfigError(ValueError):
    """Experiment configuration is inconsistent or incomplete."""


class FormatError(ValueError):
    """A field file is malformed; carries the byte offset of the failure."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericFailure(RuntimeError):
    """The solver produced a non-finite value; carries the first bad voxel."""

    def __init__(self, message, voxel=None):
        if voxel is not None:
            message = f"{message} (first offending voxel {tuple(voxel)})"
        super().__init__(message)
        self.voxel = tuple(voxel) if voxel is not None else None


class InvalidPathError(ValueError):
    """An action sequence left the grid or revisited a point."""

    def __init__(self, message, step=None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step


class PartialTableError(RuntimeError):
    """Reward-table construction failed for some movements."""

    def __init__(self, message, failed_movements=()):
        super().__init__(message)
        self.failed_movements = list(failed_movements)
