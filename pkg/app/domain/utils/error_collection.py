from dataclasses import dataclass

from app.pkgs.errors import Error, ExitCode


@dataclass
class ValidationError(Error):
    message: str = 'validation failed'
    error_code: int = ExitCode.error
    data: dict = None


@dataclass
class DomainError(Error):
    message: str = 'argument outside the operation domain'
    error_code: int = ExitCode.error
    data: dict = None


@dataclass
class FitPreconditionError(Error):
    message: str = 'not enough points for the requested fitting order'
    error_code: int = ExitCode.error
    data: dict = None


@dataclass
class SingularFitError(Error):
    message: str = 'normal equations are singular, the fit is over-parameterized'
    error_code: int = ExitCode.error
    data: dict = None


@dataclass
class UnderdeterminedLocalFitError(Error):
    message: str = 'support field does not cover enough nodes for a local fit'
    error_code: int = ExitCode.error
    data: dict = None


@dataclass
class SettleFailure(Error):
    message: str = 'plant did not reach equilibrium'
    error_code: int = ExitCode.error
    data: dict = None


@dataclass
class ContractError(Error):
    message: str = 'dimensions do not match'
    error_code: int = ExitCode.error
    data: dict = None


@dataclass
class EstimatorError(Error):
    message: str = 'jacobian update increased the objective'
    error_code: int = ExitCode.error
    data: dict = None


@dataclass
class InfeasibleStartError(Error):
    message: str = 'grasp pose is outside the workspace'
    error_code: int = ExitCode.error
    data: dict = None


@dataclass
class SolverFailure(Error):
    message: str = 'quadratic program was not solved to tolerance'
    error_code: int = ExitCode.error
    data: dict = None


@dataclass
class CorpusError(Error):
    message: str = 'corpus is empty or unreadable'
    error_code: int = ExitCode.error
    data: dict = None
