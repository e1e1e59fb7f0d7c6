"""Exception hierarchy shared by all modules."""


class PoissonDiracError(Exception):
    """Base class for every error raised by this package."""


class ExprError(PoissonDiracError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class UnknownFunctionError(ExprSyntaxError):
    def __init__(self, name, offset):
        super().__init__(f"unknown function {name!r}", offset)
        self.name = name


class BindingError(ExprError):
    def __init__(self, names):
        names = sorted(set(names))
        super().__init__("unbound identifier(s): " + ", ".join(names))
        self.names = names


class DomainError(ExprError):
    def __init__(self, message, subexpr=None):
        where = f" in sub-expression '{subexpr}'" if subexpr is not None else ""
        super().__init__(message + where)
        self.subexpr = subexpr


class GeometryError(PoissonDiracError):
    pass


class OffManifoldError(GeometryError):
    def __init__(self, residual, tol):
        super().__init__(f"point is off the submanifold (residual {residual:.3e} > tol {tol:.1e})")
        self.residual = residual


class ReductionError(PoissonDiracError):
    pass


class SingularConstraintMatrix(ReductionError):
    def __init__(self, cond, threshold):
        super().__init__(
            f"{{c,c}} is numerically singular (condition number {cond:.3e} >= {threshold:.1e});"
            " use the Poisson-Dirac split bracket instead"
        )
        self.cond = cond


class KernelNestingViolated(ReductionError):
    def __init__(self, witness, residual=None):
        super().__init__(
            "ker{c,c} is not contained in ker{sigma,c}; witness covector "
            + str([float(w) for w in witness])
        )
        self.witness = witness
        self.residual = residual


class NotPoissonDirac(ReductionError):
    def __init__(self, intersection_dim):
        super().__init__(
            f"T_pN meets its pi-orthogonal in a {intersection_dim}-dimensional subspace"
        )
        self.intersection_dim = intersection_dim


class ExtensionInsolvable(ReductionError):
    def __init__(self, residual, tol):
        super().__init__(
            f"tangency condition for the extension has residual {residual:.3e} > {tol:.1e}"
        )
        self.residual = residual


class ScalingSingular(PoissonDiracError):
    pass


class OrderSolveFailed(ReductionError):
    def __init__(self, order, residual):
        super().__init__(f"order {order} extension solve failed (residual {residual:.3e})")
        self.order = order
        self.residual = residual


class IntegrationError(PoissonDiracError):
    pass


class MidpointNonConvergence(IntegrationError):
    def __init__(self, step, increment):
        super().__init__(f"implicit midpoint failed to converge at step {step} (last increment {increment:.3e})")
        self.step = step


class NonFiniteState(IntegrationError):
    def __init__(self, step):
        super().__init__(f"non-finite state at step {step}")
        self.step = step


class SpecError(PoissonDiracError):
    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
