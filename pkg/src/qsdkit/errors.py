"""Exception hierarchy.

Every error carries a module-qualified ``code`` so the CLI can report a
stable identifier on stderr.
"""


class QSDError(Exception):
    code = "qsd.Error"


class ChainError(QSDError, ValueError):
    code = "chain.Invalid"


class ShapeError(ChainError):
    code = "chain.ShapeError"


class TooSmall(ChainError):
    code = "chain.TooSmall"


class NegativeEntry(ChainError):
    code = "chain.NegativeEntry"


class RowSumError(ChainError):
    code = "chain.RowSumError"


class NoAbsorption(ChainError):
    code = "chain.NoAbsorption"


class NotIrreducible(ChainError):
    code = "chain.NotIrreducible"


class SimplexError(QSDError, ValueError):
    code = "chain.SimplexError"


class SingularMatrix(QSDError, ArithmeticError):
    code = "chain.SingularMatrix"


class ConvergenceFailure(QSDError, ArithmeticError):
    code = "spectral.ConvergenceFailure"

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class StepTooLarge(QSDError, ValueError):
    code = "spectral.StepTooLarge"


class ScheduleError(QSDError, ValueError):
    code = "schedule.Invalid"


class UnknownAsymptotics(ScheduleError):
    code = "schedule.UnknownAsymptotics"


class UnsupportedWeights(ScheduleError):
    code = "schedule.UnsupportedWeights"


class ConditionViolated(QSDError, ValueError):
    code = "experiments.ConditionViolated"


class ParticleError(QSDError, ValueError):
    code = "fv.Invalid"


class ConfigError(QSDError, ValueError):
    code = "cli.ConfigError"
