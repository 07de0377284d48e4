"""Exception hierarchy. Every failure mode raised by the library is a subclass
of AftxError, named after the contract it violates."""


class AftxError(Exception):
    """Base class for all library errors."""


# --- tensor / autograd ---

class ShapeError(AftxError):
    """Operand shapes are incompatible for the requested operation."""


class InputTooShort(AftxError):
    """Input sequence is shorter than the operation's minimum length."""


class OddDimension(AftxError):
    """Sinusoidal encodings require an even model dimension."""


class HeadMismatch(AftxError):
    """Model dimension is not divisible by the number of attention heads."""


class LabelError(AftxError):
    """A class label is missing or outside the valid range."""


class InvalidProbability(AftxError):
    """Dropout probability must satisfy 0 <= p < 1."""


class StaleGraph(AftxError):
    """backward() was called twice on the same recorded forward pass."""


class MissingGrad(AftxError):
    """A trainable parameter has no gradient at optimizer-step time."""


# --- audio / augmentation ---

class FormatError(AftxError):
    """File is not a well-formed RIFF/WAVE container."""


class UnsupportedCodec(AftxError):
    """WAVE codec other than 16-bit PCM or IEEE float."""


class MaskTooLarge(AftxError):
    """Mask width must be strictly smaller than the masked axis."""


# --- corpus ---

class InvalidMajority(AftxError):
    """Majority threshold exceeds the number of judges."""


class MissingAnnotation(AftxError):
    """No annotation samples fall inside the requested clip window."""


class DegenerateLabels(AftxError):
    """A binary task needs both classes present."""


# --- metrics ---

class UndefinedRecall(AftxError):
    """A true class has no samples, so its recall is undefined."""


class UndefinedCorrelation(AftxError):
    """Correlation is undefined (constant input or zero variance)."""


# --- model / experiment ---

class NotAStack(AftxError):
    """An embedding stack needs at least two layers."""


class ConfigMismatch(AftxError):
    """Checkpoint contents do not match the model configuration."""


class MissingEmbedding(AftxError):
    """A corpus clip has no embedding stack on disk."""
