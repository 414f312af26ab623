"""Exception types shared across the package."""


class ModeSwitchError(Exception):
    """Base class for all package-specific errors."""


class StepOnTerminalState(ModeSwitchError):
    """The environment was stepped after it reached a terminal event."""


class InvalidInitialState(ModeSwitchError):
    """Reset was asked for a state below ground, out of bounds, or non-finite."""


class NonDifferentiablePoint(ModeSwitchError):
    """A derivative was requested at (or too close to) an activation/gate kink."""

    def __init__(self, message: str, step_index: int | None = None):
        super().__init__(message)
        self.step_index = step_index


class SchemaMismatch(ModeSwitchError):
    """A serialized document is missing fields or has the wrong version."""


class ShapeMismatch(ModeSwitchError):
    """Serialized parameter arrays do not chain into a valid network."""


class NonFiniteParameter(ModeSwitchError):
    """A network parameter is NaN or infinite."""


class TrainingDiverged(ModeSwitchError):
    """Search stalled without ever reaching a usable return level."""


class InsufficientData(ModeSwitchError):
    """Too few points for the requested pair construction or fit."""


class NonFiniteLoss(ModeSwitchError):
    """Embedding optimization produced a NaN/inf loss."""


class NonFiniteState(ModeSwitchError):
    """A model rollout left the finite-state region."""


class AllRestartsFailed(ModeSwitchError):
    """Every planner restart aborted with a non-finite rollout."""


class NoCandidates(ModeSwitchError):
    """No episode in the dataset matches the requested outcome filter."""


class DimensionMismatch(ModeSwitchError):
    """Latent vectors of different dimensions were combined."""


class IoFailure(ModeSwitchError):
    """Report export/import failed at the filesystem level."""
