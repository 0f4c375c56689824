"""Exception types shared across the package."""


class PbImpactError(Exception):
    """Base class for every error raised by this package."""


# .pb file parsing


class ParseError(PbImpactError):
    """Malformed or inconsistent .pb content."""


class MissingSection(ParseError):
    """A META/PROJECTS/VOTES section header line is absent."""


class MissingKey(ParseError):
    """A required META key or section column is absent."""


class MalformedNumber(ParseError):
    """A cost, budget, count or points value is not a parseable number."""


class UnknownProjectRef(ParseError):
    """A vote references a project id that is not declared (strict mode)."""


class DuplicateVoterId(ParseError):
    """Two VOTES rows share a voter id."""


class UnsupportedVoteType(ParseError):
    """The file declares a vote type or budget layout we do not handle."""


class DirectoryUnreadable(PbImpactError):
    """A corpus directory does not exist or cannot be listed."""


# election model and aggregation


class EmptyInstance(PbImpactError):
    """The operation needs at least one project."""


class OrdinalUnsupported(PbImpactError):
    """Popularity-based operations are undefined for ordinal ballots."""


class NonApprovalUnsupported(PbImpactError):
    """Equal shares is only defined here for approval ballots."""


class NoVoters(PbImpactError):
    """A per-voter endowment cannot be derived without voters."""


class InstanceMismatch(PbImpactError):
    """Two outcomes do not belong to the same election instance."""


# metrics


class UnknownVoter(PbImpactError):
    """The requested voter id has no ballot in the instance."""


class InvalidKey(PbImpactError):
    """The metric key combines level, calculation, unit or scope illegally."""


class UndefinedOperand(PbImpactError):
    """Loss needs both metric values to be defined."""


class DivisionByZero(PbImpactError, ZeroDivisionError):
    """Relative loss needs a nonzero baseline value."""


class EmptyCorpus(PbImpactError):
    """The corpus contains no usable instances."""


class NoUsableRows(PbImpactError):
    """No instance produced a usable conjoint row."""


# statistics


class StatsError(PbImpactError):
    """Base class for statistical precondition failures."""


class LengthMismatch(StatsError):
    """Paired samples must have equal length."""


class TooFewPoints(StatsError):
    """Not enough observations for the requested test."""


class ZeroVariance(StatsError):
    """A correlation input has no variance."""


class ZeroVarianceDifferences(StatsError):
    """Paired differences are constant; the t statistic is undefined."""


class RankDeficient(StatsError):
    """The regression design matrix does not have full column rank."""


class TooFewRows(StatsError):
    """Fewer rows than coefficients to estimate."""


class EmptyInput(StatsError):
    """The summary needs at least one value."""
