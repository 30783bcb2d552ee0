"""Exception hierarchy shared by all modules."""


class BohmError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(BohmError):
    """Invalid model or run configuration."""


class NodeSingularity(BohmError):
    """Velocity requested at a point where |psi| is below the singular threshold."""


class NodeAtInfinity(BohmError):
    """The closed-form nodal point is undefined because it escaped to infinity."""


class StepUnderflow(BohmError):
    """Node guard would need a step below the configured floor."""


class ZeroDeviation(BohmError):
    pass


class InvalidTruncation(BohmError):
    pass


class ConvergenceFailure(BohmError):
    pass


class FrequencyCollision(BohmError):
    """Two distinct integer frequency combinations coincide numerically."""


class BudgetExceeded(BohmError):
    pass


class EnvelopeViolation(BohmError):
    """Rejection sampling met a density value above its envelope."""


class EmptyRegion(BohmError):
    pass


class SchemaMismatch(BohmError):
    pass
