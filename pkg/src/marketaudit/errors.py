"""Exception hierarchy shared by every stage of the audit pipeline."""


class AuditError(Exception):
    """Base class for all audit pipeline failures."""

    exit_code = 1


class ConfigurationError(AuditError):
    """Bad plan, config, fixture path or missing precondition."""

    exit_code = 2


class DataError(AuditError):
    """Input data is present but unusable."""

    exit_code = 3


class DomainError(DataError, ValueError):
    """A value falls outside the domain an operation accepts."""


class NotFoundError(DataError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class UndefinedScoreError(DataError):
    """Misinformation score requested for an empty page or component."""


class AnnotationGapError(DataError):
    def __init__(self, item_ids):
        self.item_ids = sorted(set(item_ids))
        preview = ", ".join(self.item_ids[:10])
        more = "" if len(self.item_ids) <= 10 else f" (+{len(self.item_ids) - 10} more)"
        super().__init__(f"{len(self.item_ids)} item(s) lack an annotation: {preview}{more}")


class InsufficientCorpusError(DataError):
    def __init__(self, stance: str, found: int, needed: int):
        self.stance = stance
        self.found = found
        self.needed = needed
        super().__init__(f"stance {stance!r}: only {found} candidate item(s), {needed} required")


class ProtocolError(AuditError):
    """A platform step failed mid-run; carries the failing coordinates."""

    exit_code = 3

    def __init__(self, day: int, account_id: str, step: str, cause: Exception):
        self.day = day
        self.account_id = account_id
        self.step = step
        self.cause = cause
        super().__init__(f"day {day}, account {account_id}, step {step}: {cause}")
