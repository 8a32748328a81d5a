"""Exception types shared across the numerical layers."""


class NumericalFailure(RuntimeError):
    """A numerical routine could not meet its accuracy contract."""


class QuadratureError(NumericalFailure):
    """Adaptive quadrature did not converge; the result is not trustworthy."""


class UnreachableTargetError(NumericalFailure):
    """A curve inversion found no bracket containing the requested target."""


class NoCrossoverError(RuntimeError):
    """Two curves do not cross inside the searched bracket."""
