"""Classical Neumann problems for k-Hessian equations and the geometric
inequalities built on them."""

__version__ = "0.1.0"
