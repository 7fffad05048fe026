"""Exception hierarchy shared by all palmload modules."""


class PalmLoadError(Exception):
    """Base class for every error raised by palmload."""


class DomainError(PalmLoadError, ValueError):
    """Argument outside the domain where the quantity is defined."""


class NonConvergent(PalmLoadError, ArithmeticError):
    """Quadrature or series did not reach the requested tolerance."""


class Diverges(PalmLoadError, ArithmeticError):
    """The requested quantity is infinite (detected analytically)."""


class NotACharacteristicFunction(PalmLoadError, ValueError):
    pass


class CellTouchesWindow(PalmLoadError):
    """The sampled typical cell is not interior to the simulation window."""


class ConfigError(PalmLoadError, ValueError):
    pass


class Unstable(PalmLoadError):
    """Queue load is at or above one; stationary quantities do not exist."""


class NoConvergence(PalmLoadError):
    """Fixed-point iteration ran out of budget."""


class StrategyMismatch(PalmLoadError, ValueError):
    pass


class BudgetExceeded(PalmLoadError):
    pass


class DegenerateSamples(PalmLoadError, ValueError):
    pass


class NoRoot(PalmLoadError):
    pass


class NumericOverflow(PalmLoadError, ArithmeticError):
    pass
