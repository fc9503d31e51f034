"""Exception hierarchy shared by every fichain module."""


class FichainError(Exception):
    """Base class for all errors raised by fichain."""


class ChainError(FichainError, ValueError):
    """Rates/measure pair that does not define an irreducible reversible chain."""


class NotIrreducible(ChainError):
    pass


class SupportNotSymmetric(ChainError):
    pass


class DetailedBalanceViolated(ChainError):
    pass


class NonpositiveRates(ChainError):
    pass


class InvalidObservable(FichainError, ValueError):
    """Observable with a zero, subnormal, negative or non-finite entry."""


class DegenerateSpectrum(FichainError, ArithmeticError):
    pass


class AllStartsDegenerate(FichainError, ArithmeticError):
    pass


class TwoPointRegime(FichainError, ValueError):
    """Sparsity above 1/2: only the symmetric two-point chain gets here."""


class DegeneratePiStar(FichainError, ValueError):
    pass


class DualConstraintViolated(FichainError, ValueError):
    pass


class NotRegular(FichainError, ValueError):
    pass


class WitnessNotFound(FichainError, RuntimeError):
    """No edge validated the local comparison; always an implementation bug."""


class ModelError(FichainError, ValueError):
    """Invalid model-family parameters."""


class StateSpaceTooLarge(ModelError):
    pass


class Disconnected(ModelError):
    pass


class GNotStochastic(ModelError):
    pass


class NotSymmetric(ModelError):
    pass


class Reducible(ModelError):
    pass


class RatesViolateIncrements(ModelError):
    pass


class SpecError(FichainError, ValueError):
    """Malformed chain or model spec document."""
