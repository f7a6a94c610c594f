"""Exception types shared across the package."""


class FeedAuditError(Exception):
    pass


class ParameterDomainError(FeedAuditError, ValueError):
    pass


class SingularInformationError(FeedAuditError, ValueError):
    pass


class EmptyFeedError(FeedAuditError, ValueError):
    pass


class ShapeError(FeedAuditError, ValueError):
    pass


class ConfigError(FeedAuditError, ValueError):
    pass


class SourceError(FeedAuditError):
    """A feed source failed, timed out, or answered with a malformed feed."""

    def __init__(self, source, message, input_id=None):
        self.source = source
        self.input_id = input_id
        where = f" for input {input_id!r}" if input_id is not None else ""
        super().__init__(f"source {source!r}{where}: {message}")


class AuditAborted(FeedAuditError):
    """Raised by run_audit when a source error stops the run; carries the partial report."""

    def __init__(self, cause, partial_report):
        self.cause = cause
        self.partial_report = partial_report
        super().__init__(str(cause))
