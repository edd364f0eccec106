"""Exception types shared across the package."""


class SdeRemleError(Exception):
    """Base class for all errors raised by this package."""


class NotFound(SdeRemleError):
    """Requested a model name that is not registered."""


class SimulationDiverged(SdeRemleError):
    """Path state became non-finite during integration.

    Attributes
    ----------
    step : int
        Index of the grid step at which the state stopped being finite.
    subject_index : int or None
        Subject whose path diverged, when known.
    """

    def __init__(self, step, subject_index=None):
        self.step = step
        self.subject_index = subject_index
        where = f" (subject {subject_index})" if subject_index is not None else ""
        super().__init__(f"state became non-finite at step {step}{where}")


class DegenerateDiffusion(SdeRemleError):
    """The diffusion coefficient evaluated to a non-positive or vanishing value."""

    def __init__(self, message, step=None):
        self.step = step
        super().__init__(message)


class MissingPhi(SdeRemleError):
    """Operation needs the realized random effect but the path does not carry one."""


class EmptyEnsemble(SdeRemleError):
    """An ensemble reduction was asked for zero subjects."""


class AllDegenerate(SdeRemleError):
    """Every subject has V = 0, so the profile mean is undefined."""


class NonFiniteObjective(SdeRemleError):
    """The log-likelihood carries an infinite sentinel (a subject with V = 0, U != 0)."""


class EmptyExperiment(SdeRemleError):
    """An experiment was configured with zero replicates."""


class ExperimentFailed(SdeRemleError):
    """Too many replicates failed for the experiment report to be trusted."""


class IngestError(SdeRemleError):
    """External path data violated the ingestion contract.

    Attributes
    ----------
    line : int or None
        1-based line number in the ingested file, when known.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(SdeRemleError):
    """Base class for configuration errors; carries an optional line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownKey(ConfigError):
    pass


class MissingKey(ConfigError):
    pass


class ParseError(ConfigError):
    pass
