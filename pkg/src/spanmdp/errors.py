"""Exception hierarchy shared by every module in the package."""


class MdpError(Exception):
    """Base class for all errors raised by spanmdp."""


class ValidationError(MdpError, ValueError):
    pass


class RowNotStochastic(ValidationError):
    def __init__(self, s, a, total):
        self.s, self.a, self.total = s, a, total
        super().__init__(f"transition row (s={s}, a={a}) sums to {total!r}, expected 1")


class ValueOutOfRange(ValidationError):
    def __init__(self, field, index, value=None):
        self.field, self.index, self.value = field, index, value
        super().__init__(f"{field}{list(index)} = {value!r} lies outside [0, 1]")


class EmptyVector(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class InvalidPolicy(ValidationError):
    pass


class ParseError(MdpError):
    def __init__(self, message, location=None):
        self.location = location
        where = f" at {location}" if location else ""
        super().__init__(f"{message}{where}")


class SingularSystem(MdpError):
    pass


class NonConvergence(MdpError):
    def __init__(self, max_iters, residual=None):
        self.max_iters, self.residual = max_iters, residual
        super().__init__(f"no convergence within {max_iters} iterations (residual {residual!r})")


class NotWeaklyCommunicating(MdpError):
    pass


class NoUniqueStationary(MdpError):
    pass


class EnumerationTooLarge(MdpError):
    pass


class IndexOutOfRange(MdpError, IndexError):
    pass


class NegativePerturbation(ValidationError):
    pass


class HypothesisViolated(MdpError):
    """A precondition of a bound or reduction does not hold for the given inputs."""

    def __init__(self, failed):
        self.failed = [failed] if isinstance(failed, str) else list(failed)
        super().__init__("hypothesis violated: " + "; ".join(self.failed))


class GenerationFailed(MdpError):
    pass
