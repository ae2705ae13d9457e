"""Exception types shared across the package."""


class AuditError(Exception):
    """Base class for all errors raised by sepsisaudit."""


class MissingColumn(AuditError):
    """A required CSV column is absent (or the file has no header at all)."""


class BadValue(AuditError):
    """A value failed validation; the message names the offending location."""

    def __init__(self, message, row=None, col=None):
        loc = ""
        if row is not None:
            loc += f" (row {row}"
            loc += f", column {col!r})" if col is not None else ")"
        elif col is not None:
            loc += f" (column {col!r})"
        super().__init__(message + loc)
        self.row = row
        self.col = col


class DuplicateId(AuditError):
    """Two records share the same id within one cohort."""


class BadRatio(AuditError):
    """Split ratio outside (0, 1)."""


class BadProfile(AuditError):
    """Generator profile failed validation."""


class ParseError(AuditError):
    """A criterion or registry file could not be parsed; names the location."""


class UnknownCodeSet(AuditError):
    """A rule references a code set absent from the registry."""


class EmptyTraining(AuditError):
    """Scaler or model fitting received no rows."""


class EmptyGroup(AuditError):
    """Bootstrap CI requested for an empty group."""


class DegenerateFolds(AuditError):
    """Cross-validation could not build folds with both classes present."""


class SingleClassError(AuditError):
    """An operation needing both outcome classes saw only one.

    Raised by AUC/threshold computations (undefined-AUC signal) and by
    training entry points (single-class training set).
    """


class UndefinedGroupAUC(AuditError):
    """AUC is undefined within a comparison group; reported, not fatal."""


class UndefinedSubgroupAUC(UndefinedGroupAUC):
    """AUC is undefined within the tested subgroup."""


class NonConvergenceWarning(UserWarning):
    """An iterative solver hit its iteration budget; the fit is still returned."""
