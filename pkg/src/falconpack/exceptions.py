"""Exception hierarchy shared by every falconpack module."""


class FalconPackError(Exception):
    """Base class for all errors raised by falconpack."""


class DimensionError(FalconPackError, ValueError):
    """Tensor shapes disagree with the declared convolution geometry."""


class GeometryError(FalconPackError, ValueError):
    """Convolution geometry is invalid (group size, stride, kernel)."""


class ParameterMismatchError(FalconPackError, ValueError):
    """Operands live in different rings or use different HE parameters."""


class CapacityError(FalconPackError, ValueError):
    """A packing would write or read a coefficient outside [0, N)."""


class InfeasibleError(CapacityError):
    """No tile satisfies the packing constraints for this geometry."""


class NoiseBudgetError(FalconPackError, ArithmeticError):
    """The tracked RLWE noise bound exceeds the decryption headroom."""


class PartyMismatchError(FalconPackError, ValueError):
    """Shares from the same party were combined."""


class ConfigError(FalconPackError, ValueError):
    """A benchmark configuration could not be parsed or validated."""
