"""Exception hierarchy shared by every module."""


class CRDIError(Exception):
    """Base class for library errors."""


class SingularSpinor(CRDIError):
    """The matrix spinor is not invertible at the requested point."""


class ConstraintViolation(CRDIError):
    """The inverted potential is not a pure real vector (the ansatz admits no potential)."""


class PathDisagreement(CRDIError):
    """Two independent computations of the same quantity disagree beyond tolerance."""


class DomainError(CRDIError, ValueError):
    """A point or parameter lies outside the admissible domain."""


class NotNormalizable(CRDIError):
    """The density integral diverges."""


class IntegrationError(CRDIError):
    """The radial ODE integration failed or crossed a pole."""


class ConfigError(CRDIError, ValueError):
    """A run configuration is malformed or inconsistent."""


class NotARotor(CRDIError, ValueError):
    """A field expected to be a unimodular rotor has a non-bivector logarithmic derivative."""
