"""Exception hierarchy shared by every quartfuse subpackage."""

class QuartfuseError(Exception):
    """Base exception for all quartfuse errors."""

class RegistryError(QuartfuseError):
    """Exception raised when a registered class does not declare its metadata or clashes with another."""

class ConfigError(QuartfuseError):
    """Exception raised when a configuration value is unknown, malformed or inconsistent."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field

class DimensionError(QuartfuseError):
    """Exception raised when tensor shapes do not agree."""

class DomainError(QuartfuseError):
    """Exception raised when an op receives values outside its mathematical domain."""

class ContractError(QuartfuseError):
    """Exception raised when a pre- or post-condition of an operation is violated."""

class PrecisionError(ContractError):
    """Exception raised when 32-bit and 64-bit tensors meet in one graph."""

class FreezeViolationError(ContractError):
    """Exception raised when a frozen parameter group changed during a stage."""

class InputError(QuartfuseError):
    """Exception raised when input data cannot be processed (empty, too short, out of vocabulary)."""

class EvaluationError(QuartfuseError):
    """Exception raised when a function evaluated by the gradient checker is not finite."""

class OptimizerError(QuartfuseError):
    """Exception raised by the optimizer, e.g. on NaN gradients."""

    def __init__(self, message: str, group: str | None = None):
        super().__init__(message)
        self.group = group

class FormatError(QuartfuseError):
    """Exception raised when an on-disk blob, checkpoint or manifest is malformed."""

class IntegrityError(FormatError):
    """Exception raised when a file is truncated or its content does not match its index."""
