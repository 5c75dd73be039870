"""Exception hierarchy shared by all modules."""


class C0IPMError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(C0IPMError, ValueError):
    pass


class GeometryError(C0IPMError, ValueError):
    pass


class InvertedElementError(GeometryError):
    pass


class CapabilityError(C0IPMError, NotImplementedError):
    pass


class DomainError(C0IPMError, ValueError):
    pass


class ConnectivityError(C0IPMError, ValueError):
    pass


class NonManifoldError(ConnectivityError):
    pass


class ParseError(C0IPMError, ValueError):
    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SpecificationError(C0IPMError, ValueError):
    pass


class ConstraintConflictError(C0IPMError, ValueError):
    pass


class SolverError(C0IPMError, RuntimeError):
    pass


class DegenerateError(C0IPMError, ValueError):
    pass
