"""Exception types shared across the package."""


class DataFormatError(ValueError):
    """A serialized record (pose stream, feature file, bundle) is malformed."""


class DegeneratePoseError(ValueError):
    """A pose produced a near-zero body segment; it should have been filtered."""


class DegenerateEmbeddingError(ValueError):
    """An embedding vector has (near-)zero norm; cosine distance is undefined."""


class TrainingDegenerateError(RuntimeError):
    """Every batch of an epoch was skipped; no gradient signal is available."""


class InvalidVariantError(ValueError):
    """Requested classifier variant is outside the supported model grid."""


class IllegalTransitionError(RuntimeError):
    """A mission state transition outside the declared edge set was requested."""


class PopulationSamplingError(RuntimeError):
    """Could not sample a population meeting the separation constraints."""
