"""Exception types shared across the package."""


class TenetError(Exception):
    """Base class for all package errors."""


class ShapeError(TenetError, ValueError):
    """Array or manifest dimensions do not line up."""


class NumericError(TenetError, ArithmeticError):
    """A computation produced NaN or infinity."""


class InputError(TenetError, ValueError):
    """Caller supplied an invalid value."""


class ConfigError(TenetError, ValueError):
    """Invalid or inconsistent run configuration."""


class EmbeddingLookupError(TenetError, KeyError):
    """Exact-match embedding table has no entry for the query text."""


class TableLoadError(TenetError, ValueError):
    """Embedding table file is malformed or inconsistent."""


class ExpertGateError(TenetError, RuntimeError):
    """Scripted experts failed the success-rate gate; generation refused."""

    def __init__(self, failures):
        self.failures = dict(failures)
        listing = ", ".join(f"{tid} ({rate:.2f})" for tid, rate in sorted(self.failures.items()))
        super().__init__(f"expert success gate failed for: {listing}")


class MissingPromptError(TenetError, ValueError):
    """A prompt-conditioned baseline was evaluated without prompt trajectories."""


class TrainingDivergedError(TenetError, RuntimeError):
    """Training loss became non-finite; carries the last finite checkpoint."""

    def __init__(self, step, last_good):
        self.step = step
        self.last_good = last_good
        super().__init__(f"non-finite loss at step {step}; last good checkpoint retained")


class ArtifactError(TenetError, ValueError):
    """On-disk artifact is missing, malformed, or incompatible with the config."""
