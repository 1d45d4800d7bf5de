"""nambulab: a numerical laboratory for Nambu and Hamiltonian mechanics.

Dynamics on extended phase space, pointwise exterior calculus, transport of
cycles and chains under the flow, and verification of the conserved objects
that symmetries produce: conserved functions in the Hamiltonian case,
conserved line and surface integrals (integral invariants) in the Nambu
case.
"""

from .exprs import (
    Dual,
    EvalDomainError,
    Expr,
    ExprSyntaxError,
    UnboundVariableError,
    UnknownIdentifierError,
    evaluate,
    gradient,
    parse,
    render,
)
from .tape import backend_name, compile_expr

__version__ = "0.1.0"
