"""Toolkit error hierarchy.

Every domain error carries a stable symbolic name (the class name) and a
distinct nonzero process exit code, so the CLI can report failures as a
single machine-parsable stderr line ``ERROR <name>: <detail>`` and exit
with the matching status. Codes are frozen; new errors append.
"""

from __future__ import annotations


class ScoresetsError(Exception):
    """Base class for all domain errors raised by this package."""

    exit_code: int = 9

    @property
    def name(self) -> str:
        return type(self).__name__


class NegativeEntry(ScoresetsError):
    exit_code = 10


class EntryOutOfRange(ScoresetsError):
    """Probability entry above 1 (negative entries get NegativeEntry)."""

    exit_code = 11


class RowSumOutOfTolerance(ScoresetsError):
    exit_code = 12


class TooFewClasses(ScoresetsError):
    exit_code = 13


class NonFiniteInput(ScoresetsError):
    exit_code = 14


class LengthMismatch(ScoresetsError):
    exit_code = 15


class DuplicateIds(ScoresetsError):
    exit_code = 16


class LabelOutOfRange(ScoresetsError):
    """Known label outside [0, num_classes)."""

    exit_code = 17


class UnknownLabel(ScoresetsError):
    """An operation that needs true labels met the unknown-label sentinel."""

    exit_code = 18


class RatiosDoNotSumToOne(ScoresetsError):
    exit_code = 19


class UnknownLabelWithStratification(ScoresetsError):
    exit_code = 20


class IdMissingFromManifest(ScoresetsError):
    exit_code = 21


class ClassCountMismatch(ScoresetsError):
    exit_code = 22


class DuplicateIdAfterNamespacing(ScoresetsError):
    exit_code = 23


class EmptyCalibrationSet(ScoresetsError):
    exit_code = 24


class AlphaOutOfRange(ScoresetsError):
    exit_code = 25


class TooFewModels(ScoresetsError):
    exit_code = 26


class IdSequenceMismatch(ScoresetsError):
    exit_code = 27


class LabelMismatch(ScoresetsError):
    exit_code = 28


class BadWeights(ScoresetsError):
    exit_code = 29


class IdSetMismatch(ScoresetsError):
    exit_code = 30


class EmptyTestSet(ScoresetsError):
    exit_code = 31


class InvalidConfig(ScoresetsError):
    exit_code = 32


class MissingHeader(ScoresetsError):
    exit_code = 33


class RaggedRow(ScoresetsError):
    exit_code = 34


class NonNumericCell(ScoresetsError):
    exit_code = 35


class DuplicateSampleId(ScoresetsError):
    exit_code = 36


class SchemaVersionMismatch(ScoresetsError):
    """Wrong format_version, or a field set that does not match the schema."""

    exit_code = 37


class MalformedSetCell(ScoresetsError):
    exit_code = 38


class QHatOutOfRange(ScoresetsError):
    exit_code = 39


#: name -> exit code, for `--help` and for the CLI error trap.
ERROR_CODES: dict[str, int] = {
    cls.__name__: cls.exit_code
    for cls in sorted(ScoresetsError.__subclasses__(), key=lambda c: c.exit_code)
}
