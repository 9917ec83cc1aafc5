"""Exception hierarchy for the khltest package.

Two broad branches matter to callers (and to the CLI exit codes):
``ValidationError`` for rejected inputs, ``ComputationError`` for
operations that fail on otherwise well-formed inputs.
"""


class KhltestError(Exception):
    """Base class for all khltest errors."""


class ValidationError(KhltestError):
    """Input rejected before any real computation started."""


class InputError(ValidationError):
    """Malformed argument: bad shape, non-finite value, out-of-range option."""


class DegenerateDataError(ValidationError):
    """Data cannot support the requested operation (e.g. a zero median distance)."""


class DegenerateDesignError(ValidationError):
    """Design matrix cannot be built (e.g. a factor with a single level)."""


class UnsupportedKernelError(ValidationError):
    """Kernel has no exact finite-dimensional feature map."""


class ComputationError(KhltestError):
    """A numerical step failed on inputs that passed validation."""


class DegenerateFitError(ComputationError):
    """Residual Gram matrix is numerically zero: the model fits perfectly."""


class NonTestableContrastError(ValidationError):
    """The contrast lies outside the estimable space of the design."""


class TruncationError(ComputationError):
    """Requested truncation exceeds the numerical rank of the fitted spectrum."""


class AnchorRankError(ComputationError):
    """Requested anchor count exceeds the landmark residual rank."""


class LeverageError(ComputationError):
    """An observation is fully determined by the design (leverage at 1)."""


class OracleError(KhltestError):
    """The brute-force reference computation could not be carried out."""


class DesignLevelLossWarning(UserWarning):
    """A landmark subsample dropped all observations of some design column."""
