"""Exception hierarchy shared across the platform modules."""


class PlatformError(Exception):
    """Base class for all platform errors."""


# --- spec / onboarding ---------------------------------------------------

class SpecValidationError(PlatformError):
    """Raised with a structured list of problems found in a use-case spec."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(p.get("error", "?") for p in self.problems))


class EmptyDecisionSpace(PlatformError):
    pass


class DuplicateMetric(PlatformError):
    pass


class BadWindow(PlatformError):
    pass


class TypeMismatch(PlatformError):
    pass


# --- event log -----------------------------------------------------------

class UnknownUseCase(PlatformError):
    pass


class BadPropensity(PlatformError):
    pass


class UnknownMetric(PlatformError):
    pass


class DuplicateDecision(PlatformError):
    pass


class InsufficientData(PlatformError):
    pass


# --- preprocessing -------------------------------------------------------

class AllMissingColumn(PlatformError):
    pass


class SchemaVersionMismatch(PlatformError):
    pass


class BadRatios(PlatformError):
    pass


class EmptySample(PlatformError):
    pass


# --- models --------------------------------------------------------------

class DegenerateLabels(PlatformError):
    pass


class NonFiniteLoss(PlatformError):
    pass


class DimensionMismatch(PlatformError):
    pass


# --- autoconf ------------------------------------------------------------

class AmbiguousTask(PlatformError):
    pass


# --- HTE -----------------------------------------------------------------

class MissingArm(PlatformError):
    pass


# --- policies ------------------------------------------------------------

class MissingActionOutput(PlatformError):
    pass


# --- off-policy evaluation ----------------------------------------------

class EmptyDataset(PlatformError):
    pass


class ZeroPropensity(PlatformError):
    pass


class AllWeightsZero(PlatformError):
    pass


class TooFewRows(PlatformError):
    pass


# --- RL ------------------------------------------------------------------

class UnorderedInput(PlatformError):
    pass


class CoverageFailure(PlatformError):
    pass


class BadGamma(PlatformError):
    pass


# --- tuning --------------------------------------------------------------

class NegativeWeight(PlatformError):
    pass


class BadReference(PlatformError):
    pass


class EmptySpace(PlatformError):
    pass


class NoSurvivors(PlatformError):
    pass


# --- simlab --------------------------------------------------------------

class BadEnv(PlatformError):
    pass


class TooSmallArms(PlatformError):
    pass


# --- lifecycle -----------------------------------------------------------

class ManifestUnreproducible(PlatformError):
    pass


class NoParent(PlatformError):
    pass


class UnknownCandidate(PlatformError):
    pass


class CanaryRejected(PlatformError):
    pass


class NoChampion(PlatformError):
    pass


class NoTuningRun(PlatformError):
    pass
