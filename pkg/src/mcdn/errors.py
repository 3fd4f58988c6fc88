"""Exception types shared across the package."""


class ContractError(ValueError):
    """An operation was called outside its documented contract.

    The message names the offending argument or axis.
    """


class StructureNotFoundError(RuntimeError):
    """The ridge detector could not find the expected bright structures."""


class CalibrationError(RuntimeError):
    """Probability calibration is impossible (e.g. single-class margins)."""


class ModelFormatError(RuntimeError):
    """A model container failed to parse; message carries the byte offset."""


class GradCheckAbortedError(RuntimeError):
    """The fragment under check produced non-deterministic forward passes."""
