"""Exception hierarchy.

Every mathematical failure derives from :class:`InversionError` so the CLI
can map it to exit code 1; grammar and usage problems derive from
:class:`ParseError` (exit code 2).
"""


class InversionError(Exception):
    """A mathematical operation could not be completed."""


class NotDivergence(InversionError):
    pass


class NotIntegrable(InversionError):
    def __init__(self, integrand, var, msg=""):
        self.integrand = integrand
        self.var = var
        super().__init__(msg or f"no antiderivative of {integrand} with respect to {var}")


class NotInImage(InversionError):
    pass


class NotInKernel(InversionError):
    pass


class UnsupportedScaling(InversionError):
    pass


class RankingExhausted(InversionError):
    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace or []


class RankingCheckFailed(InversionError):
    """Raised inside an iteration; the orchestrator re-ranks on it."""


class NoJetDependence(InversionError):
    pass


class NotLinear(InversionError):
    pass


class OptimizationExhausted(InversionError):
    pass


class NonPolynomial(InversionError):
    pass


class NotACurl(InversionError):
    pass


class NotAnInvolution(InversionError):
    pass


class NoOrbitSplit(InversionError):
    pass


class ParseError(Exception):
    def __init__(self, msg, pos=None):
        self.pos = pos
        super().__init__(msg if pos is None else f"{msg} (at position {pos})")
