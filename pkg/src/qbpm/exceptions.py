"""Exception hierarchy shared by all qbpm modules."""


class QBPMError(Exception):
    """Base class for every error raised by qbpm."""


class StructuralError(QBPMError, ValueError):
    """Invalid qubit index, gate arity, ansatz size or logit selection."""


class EncodingError(QBPMError, ValueError):
    """A feature vector cannot be amplitude encoded (all zeros)."""


class CapacityError(QBPMError, ValueError):
    """Input larger than the register (or oracle) can hold."""


class BindingError(QBPMError, KeyError):
    """A parameter slot reference does not resolve."""

    def __str__(self):
        # KeyError quotes its message by default
        return str(self.args[0]) if self.args else ""


class UsageError(QBPMError, ValueError):
    """Caller violated an operation's precondition."""


class ConfigError(QBPMError, ValueError):
    """Invalid run configuration."""


class DataError(QBPMError, ValueError):
    """Dataset cannot be loaded or split."""


class NumericalError(QBPMError, ArithmeticError):
    """Non-finite loss or gradient during optimisation."""
