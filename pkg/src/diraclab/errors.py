"""Exception hierarchy with machine-readable codes.

Every error raised by the library carries a short ``code`` string so that
the command-line runner can report failures without parsing messages.
"""


class DiracLabError(Exception):
    """Base class for all library errors.

    Parameters
    ----------
    message : str
        Human-readable description.
    details : dict, optional
        Extra diagnostic values (residual norms, measured defects, ...).
    """

    code = "E_GENERIC"

    def __init__(self, message, details=None):
        super().__init__(message)
        self.message = message
        self.details = dict(details or {})

    def to_dict(self):
        return {"code": self.code, "message": self.message, "details": self.details}


class DimensionError(DiracLabError, ValueError):
    code = "E_DIMENSION"


class ValidationError(DiracLabError, ValueError):
    """A candidate Dirac triple violates one or more structural relations.

    The ``violations`` attribute lists ``(name, residual)`` pairs.
    """

    code = "E_VALIDATION"

    def __init__(self, message, violations=(), details=None):
        super().__init__(message, details)
        self.violations = list(violations)

    def to_dict(self):
        out = super().to_dict()
        out["violations"] = [{"relation": n, "residual": r} for n, r in self.violations]
        return out


class SpectralCutError(DiracLabError, ValueError):
    code = "E_SPECTRAL_CUT"


class EigenSolverError(DiracLabError, RuntimeError):
    code = "E_EIGENSOLVER"


class ProjectionError(DiracLabError, ValueError):
    code = "E_NOT_IDEMPOTENT"


class SymplecticObstructionError(DiracLabError, ValueError):
    code = "E_SYMPLECTIC_OBSTRUCTION"


class EllipticDataError(DiracLabError, ValueError):
    code = "E_ELLIPTIC_DATA"


class NonConvergenceError(DiracLabError, RuntimeError):
    code = "E_NONCONVERGENCE"


class NotRepresentedError(DiracLabError, ValueError):
    code = "E_NOT_REPRESENTED"


class GraphUnavailableError(DiracLabError, ValueError):
    code = "E_GRAPH_UNAVAILABLE"


class InvarianceError(DiracLabError, ValueError):
    code = "E_NOT_INVARIANT"


class PathError(DiracLabError, ValueError):
    code = "E_PATH"


class VerificationError(DiracLabError, AssertionError):
    """A verified identity failed; ``details`` holds the witness."""

    code = "E_VERIFICATION"


class ConfigError(DiracLabError, ValueError):
    """Configuration does not match the schema.

    ``pointer`` is a JSON pointer (RFC 6901) to the offending field.
    """

    code = "E_CONFIG"

    def __init__(self, message, pointer="", details=None):
        super().__init__(message, details)
        self.pointer = pointer

    def to_dict(self):
        out = super().to_dict()
        out["pointer"] = self.pointer
        return out
