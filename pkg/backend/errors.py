# backend/errors.py
"""
Exception hierarchy for the tomography pipeline.

Every error carries the CLI exit code it maps to, so the orchestrator can
turn a failure into the result dictionary that run.py reports.
"""
from typing import Optional


class TomographyError(Exception):
    """Base class for all pipeline errors"""

    exit_code = 1


class ConfigError(TomographyError, ValueError):
    """Invalid experiment configuration or command-line arguments"""

    exit_code = 2

    def __init__(self, issues):
        if isinstance(issues, str):
            issues = [issues]
        self.issues = list(issues)
        super().__init__("; ".join(self.issues))


class DimensionError(TomographyError, ValueError):
    """Operands of incompatible Hilbert space dimension"""

    exit_code = 2


class NonPhysicalError(TomographyError, ValueError):
    """Matrix or probability outside the physical set beyond tolerance"""

    exit_code = 3


class NumericalError(TomographyError):
    """Numerical failure during reconstruction"""

    exit_code = 3


class ConvergenceError(NumericalError):
    """Fixed-point solver did not reach the requested tolerance"""

    def __init__(self, message: str, residual: float, iterations: int, chi=None):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations
        self.chi = chi


class SingularProtocolError(NumericalError):
    """Protocol is not informationally complete: the I matrix is singular"""


class RecordIOError(TomographyError, OSError):
    """Reading or writing a protocol, count, calibration or result file failed"""

    exit_code = 4

    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message if path is None else f"{message}: {path}")
        self.path = path
