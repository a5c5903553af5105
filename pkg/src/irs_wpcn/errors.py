"""Exception hierarchy shared by every stage of the pipeline."""


class IrsWpcnError(Exception):
    """Base class for all package errors."""


# numkit
class NonHermitianInput(IrsWpcnError, ValueError):
    pass


class NotRankOne(IrsWpcnError):
    pass


class NotPsd(IrsWpcnError, ValueError):
    pass


# conic solver
class SolverError(IrsWpcnError):
    """Raised by the conic solver when a problem cannot be set up or solved."""


class MalformedProblem(SolverError, ValueError):
    pass


# channel
class DegenerateGeometry(IrsWpcnError, ValueError):
    pass


class PhaseNotUnitModulus(IrsWpcnError, ValueError):
    pass


class DimensionMismatch(IrsWpcnError, ValueError):
    pass


# robust model
class NegativeInput(IrsWpcnError, ValueError):
    pass


class OutOfDomain(IrsWpcnError, ValueError):
    pass


class ZeroReceiver(IrsWpcnError, ValueError):
    pass


# optimisation stages
class StageInfeasible(IrsWpcnError):
    """A sub-problem has no feasible point for the given inputs."""

    stage = "unknown"


class InfeasiblePower(StageInfeasible):
    stage = "energy_matrix"


class EhDomain(StageInfeasible):
    stage = "energy_matrix"


class SinrInfeasible(StageInfeasible):
    stage = "receive_beams"


class PowerInfeasible(StageInfeasible):
    stage = "power_alloc"


class LiftInfeasible(StageInfeasible):
    stage = "irs_phases"


class TimeInfeasible(StageInfeasible):
    stage = "time_allocation"


class ScenarioInfeasible(IrsWpcnError):
    """A whole AO run cannot start; ``stage`` names the failing sub-problem."""

    def __init__(self, stage, message=""):
        super().__init__(f"{stage}: {message}" if message else stage)
        self.stage = stage


# experiments
class ConfigInvalid(IrsWpcnError, ValueError):
    """Configuration rejected; ``errors`` lists ``(field_path, message)`` pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        lines = "; ".join(f"{path}: {msg}" for path, msg in self.errors)
        super().__init__(lines)


class ConfigParseError(ConfigInvalid):
    pass
