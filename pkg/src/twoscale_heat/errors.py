"""Exception types shared across the package."""


class TwoScaleError(Exception):
    """Base class for all package errors."""


class SpecError(TwoScaleError):
    """Invalid problem description (geometry, coefficients, tiling)."""


class MeshError(TwoScaleError):
    """Mesh generation failed (non-conforming interfaces, bad resolution)."""


class OutOfDomainError(TwoScaleError):
    """Point location was asked for a point outside the mesh."""


class ConstraintError(TwoScaleError):
    """Conflicting Dirichlet constraints on the same node."""


class NonConvergenceError(TwoScaleError):
    """Iterative solve stopped at the iteration cap before the tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class ConfigError(TwoScaleError):
    """Configuration file could not be parsed or validated."""


class LockError(TwoScaleError):
    """The requested output directory is locked by another run."""


class StageError(TwoScaleError):
    """A pipeline stage failed; carries the stage name for exit codes."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
