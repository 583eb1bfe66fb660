"""Errors Module - Exception hierarchy
Every failure raised by the library, grouped by the exit code the CLI maps it to

Copyright (C) 2025 Embedded State Detector Contributors
This file is licensed under the GNU General Public License v3.0
See LICENSE or https://www.gnu.org/licenses/gpl-3.0.txt for details.
"""


class EmbeddedStateError(Exception):
    """Base class for every error raised by the package"""
    exit_code = 1


# ---------- Spec errors (exit code 2) ----------

class SpecError(EmbeddedStateError):
    exit_code = 2


class SpecParseError(SpecError):
    """The spec document is not valid JSON or misses required keys"""


class ValidationError(SpecError):
    """The spec parsed but a value is outside its admissible range"""


# ---------- Numerical errors (exit code 3) ----------

class NumericalError(EmbeddedStateError):
    exit_code = 3


class NonIntegrableTail(NumericalError):
    pass


class ToleranceNotMet(NumericalError):
    pass


class PoleAtEndpoint(NumericalError):
    pass


class NonSmoothAtPole(NumericalError):
    pass


class IntegrabilityViolation(NumericalError):
    pass


class UnsupportedOrder(NumericalError):
    pass


class DomainError(NumericalError):
    pass


class StiffnessFailure(NumericalError):
    pass


class AsymptoticFitFailure(NumericalError):
    pass


class MatchingRadiusDisagreement(NumericalError):
    pass


class IterationDivergence(NumericalError):
    pass


class TailBoundTooLarge(NumericalError):
    pass


class SourceIntegrabilityViolation(NumericalError):
    pass


class NonPositiveResult(NumericalError):
    pass


class PositivityViolation(NumericalError):
    """A transform whose positivity is guaranteed came out negative"""


class ResidualTooLarge(NumericalError):
    pass


class IdentityMismatch(NumericalError):
    pass


class RecoveryFailed(NumericalError):
    pass


class ResolutionTooLow(NumericalError):
    pass


class TailNotDecaying(NumericalError):
    pass


# ---------- Oracle ambiguity (exit code 4) ----------

class AmbiguousScan(EmbeddedStateError):
    """Localization of the oracle candidate is borderline; never decided silently"""
    exit_code = 4
