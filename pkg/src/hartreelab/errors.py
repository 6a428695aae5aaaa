"""Exception taxonomy.

Every error carries a stable machine-readable ``code`` so CLI reports and
tests can match failures without parsing messages.
"""


class HartreeError(Exception):
    code = "ERROR"

    def __str__(self):
        msg = super().__str__()
        return f"[{self.code}] {msg}" if msg else f"[{self.code}]"


# -- parameter / grid validation ---------------------------------------------

class DimensionTooSmall(HartreeError):
    code = "DIMENSION_TOO_SMALL"


class ExponentOutOfRange(HartreeError):
    code = "EXPONENT_OUT_OF_RANGE"


class GridMismatch(HartreeError):
    code = "GRID_MISMATCH"


class SupportViolation(HartreeError):
    code = "SUPPORT_VIOLATION"


class NonfiniteState(HartreeError):
    code = "NONFINITE_STATE"


# -- field file format --------------------------------------------------------

class BadMagic(HartreeError):
    code = "BAD_MAGIC"


class TruncatedPayload(HartreeError):
    code = "TRUNCATED_PAYLOAD"


# -- spectral operations ------------------------------------------------------

class GridTooLarge(HartreeError):
    code = "GRID_TOO_LARGE"


class NegativeArgument(HartreeError):
    code = "NEGATIVE_ARGUMENT"


# -- functional algebra -------------------------------------------------------

class DegenerateField(HartreeError):
    code = "DEGENERATE_FIELD"


class ZeroField(HartreeError):
    code = "ZERO_FIELD"


class NonpositiveLambda(HartreeError):
    code = "NONPOSITIVE_LAMBDA"


# -- solvers -------------------------------------------------------------------

class NoConvergence(HartreeError):
    code = "NO_CONVERGENCE"


class Collapse(HartreeError):
    code = "COLLAPSE"


class QOutOfRange(HartreeError):
    code = "Q_OUT_OF_RANGE"


class MassOutOfRange(HartreeError):
    code = "MASS_OUT_OF_RANGE"


class AllSeedsFailed(HartreeError):
    code = "ALL_SEEDS_FAILED"


class NoValidSamples(HartreeError):
    code = "NO_VALID_SAMPLES"


# -- experiment orchestration ---------------------------------------------------

class ConcordanceFailure(HartreeError):
    code = "CONCORDANCE_FAILURE"

    def __init__(self, msg="", offenders=()):
        super().__init__(msg)
        self.offenders = list(offenders)


class StabilityFailure(HartreeError):
    code = "STABILITY_FAILURE"


class ConfigError(HartreeError):
    code = "CONFIG_ERROR"
