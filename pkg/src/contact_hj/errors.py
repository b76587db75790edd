"""Exception types shared across the library."""


class ContactHJError(Exception):
    """Base class for every error raised by this package."""


class PreconditionError(ContactHJError, ValueError):
    """An operation was invoked outside its documented domain."""


class NonConvergence(ContactHJError, RuntimeError):
    """An iterative solve exhausted its budget without meeting tolerance."""


class NoRootFound(NonConvergence):
    """Every shooting start failed to solve the boundary condition."""


class Overflow(ContactHJError, ArithmeticError):
    """A cost trajectory left the representable range (blow-up guard)."""


class MonotonicityViolation(ContactHJError, RuntimeError):
    """Cost trajectories lost their ordering in the initial value."""


class BoundViolation(ContactHJError, RuntimeError):
    """A computed quantity exceeded its a-priori envelope."""


class ConfigError(ContactHJError, ValueError):
    """A run configuration failed validation."""


#: Trajectories whose magnitude passes this are treated as blown up.
OVERFLOW_LIMIT = 1e15
