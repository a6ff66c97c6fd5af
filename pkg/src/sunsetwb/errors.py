"""Exception hierarchy shared by all workbench modules.

The CLI maps these onto exit codes: usage and domain violations exit 2,
failed numeric verifications exit 1, and internal contradictions with the
expected reduction structure exit 3.
"""


class SunsetwbError(Exception):
    """Base class for all workbench errors."""


class DomainError(SunsetwbError):
    """Input outside the mathematical domain of an operation."""


class ZeroDivisor(DomainError):
    """Division by the zero polynomial or zero rational function."""


class PoleError(DomainError):
    """Evaluation of a rational function at a zero of its denominator."""


class GammaPole(DomainError):
    """Gamma function requested at a non-positive integer."""


class DivergentSeries(DomainError):
    """Hypergeometric series evaluated outside its convergence domain."""


class LowerParameterPole(DomainError):
    """A lower-parameter Pochhammer vanishes before the series terminates."""


class SingularOperator(DomainError):
    """A contiguous-shift operator with identically vanishing scale."""


class UnsupportedShift(DomainError):
    """Requested parameter shift is outside the implemented directions."""


class ParseError(SunsetwbError):
    """Text input rejected by a grammar; carries the offending position."""

    def __init__(self, message: str, text: str = "", pos: int = 0):
        super().__init__(message)
        self.text = text
        self.pos = pos

    def caret_diagnostic(self) -> str:
        """Two-line diagnostic with a caret under the failing character."""
        return f"{self.text}\n{' ' * self.pos}^ {self.args[0]}"


class NotAMaster(DomainError):
    """Index vector is not one of the nontrivial master integrals."""


class RepresentationUndefined(DomainError):
    """Hypergeometric representation requested for non-positive indices."""


class ContradictionError(SunsetwbError):
    """Computation contradicts the expected reduction structure (fatal)."""


class RelationCountMismatch(ContradictionError):
    """Nullspace of the master-coordinate system is not one-dimensional."""


class IBPInconsistency(ContradictionError):
    """Integration-by-parts identities reduce an integral inconsistently."""


class NotReducible(DomainError):
    """Target integral is outside the closure of the reduction table."""
