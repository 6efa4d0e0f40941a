"""Error hierarchy shared by all gridops subsystems.

Every error carries a stable machine-readable ``code`` so the HTTP layer
and the CLI can map failures without string matching.
"""

from __future__ import annotations


class GridOpsError(Exception):
    """Base class; ``code`` identifies the failure across API/CLI surfaces."""

    code = "ERROR"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


# -- registry ---------------------------------------------------------------

class AuthzDenied(GridOpsError):
    code = "AUTHZ_DENIED"


class HierarchyViolation(GridOpsError):
    code = "HIERARCHY_VIOLATION"


class DuplicateSiblingName(GridOpsError):
    code = "DUPLICATE_SIBLING_NAME"


class UnknownIdentity(GridOpsError):
    code = "UNKNOWN_IDENTITY"


class UnknownNode(GridOpsError):
    code = "UNKNOWN_NODE"


# -- probe engine -----------------------------------------------------------

class UnknownService(GridOpsError):
    code = "UNKNOWN_SERVICE"


class FutureTimestamp(GridOpsError):
    code = "FUTURE_TIMESTAMP"


class PayloadTooLarge(GridOpsError):
    code = "PAYLOAD_TOO_LARGE"


class UnknownSite(GridOpsError):
    code = "UNKNOWN_SITE"


class MpiNotSupported(GridOpsError):
    code = "MPI_NOT_SUPPORTED"


# -- sla engine -------------------------------------------------------------

class EmptyWindow(GridOpsError):
    code = "EMPTY_WINDOW"


class UnsortedResults(GridOpsError):
    code = "UNSORTED_RESULTS"


class NoCriticalServices(GridOpsError):
    code = "NO_CRITICAL_SERVICES"


# -- accounting -------------------------------------------------------------

class InvalidDims(GridOpsError):
    code = "INVALID_DIMS"


class ZeroCapacity(GridOpsError):
    code = "ZERO_CAPACITY"


# -- wms monitor ------------------------------------------------------------

class MissingMetric(GridOpsError):
    code = "MISSING_METRIC"


class OutOfRange(GridOpsError):
    code = "OUT_OF_RANGE"


class UnknownWms(GridOpsError):
    code = "UNKNOWN_WMS"


class UnknownMetric(GridOpsError):
    code = "UNKNOWN_METRIC"


class OutOfOrderSnapshot(GridOpsError):
    code = "OUT_OF_ORDER_SNAPSHOT"


# -- operations -------------------------------------------------------------

class DateBeforeEpoch(GridOpsError):
    code = "DATE_BEFORE_EPOCH"


class NoSiteContact(GridOpsError):
    code = "NO_SITE_CONTACT"


class IllegalTransition(GridOpsError):
    code = "ILLEGAL_TRANSITION"


class UnknownTicket(GridOpsError):
    code = "UNKNOWN_TICKET"


# -- service api ------------------------------------------------------------

class Unauthenticated(GridOpsError):
    code = "UNAUTHENTICATED"


class UnknownDn(GridOpsError):
    code = "UNKNOWN_DN"


class ValidationError(GridOpsError):
    code = "VALIDATION"
