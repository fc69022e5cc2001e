"""Exception types raised across the package."""


class RfTaxisError(Exception):
    pass


class DistanceTooSmall(RfTaxisError, ValueError):
    """Evaluation requested inside the near-field exclusion radius of a source."""


class NotSmoothlyDifferentiable(RfTaxisError):
    pass


class DegenerateFit(RfTaxisError, ValueError):
    pass


class ZeroNoise(RfTaxisError, ValueError):
    pass


class ProbeOutOfDomain(RfTaxisError):
    """A probe point or step target violated the field preconditions during a run."""


class InsufficientEnsemble(RfTaxisError, ValueError):
    pass


class ConfigError(RfTaxisError, ValueError):
    pass
