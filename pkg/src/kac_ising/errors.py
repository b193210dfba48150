"""
Exception hierarchy shared by all kac_ising modules
"""


class KacIsingError(Exception):
    """Base class for every error raised by kac_ising"""


class InvalidInputError(KacIsingError, ValueError):
    """Input is not a finite number (NaN, inf) or has the wrong shape"""


class DomainError(KacIsingError, ValueError):
    """Input is finite but outside the mathematical domain of the operation"""


class SizeError(KacIsingError, ValueError):
    """Exact enumeration requested beyond its supported size"""


class ConvergenceError(KacIsingError, ArithmeticError):
    """Iterative solver hit its iteration cap"""

    def __init__(self, message: str, iterations: int = 0, residual: float = float('nan')):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class ConfigError(KacIsingError, ValueError):
    """Bad configuration file or command-line parameters"""
