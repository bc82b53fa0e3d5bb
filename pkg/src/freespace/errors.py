"""Exception types shared across the package."""


class FormatError(ValueError):
    """Malformed file content: bad magic, bad dimensions, bad payload."""


class FitFailed(RuntimeError):
    """Robust ground-plane fit did not reach the inlier quorum."""


class ProjectionUndefined(ValueError):
    """Birds-eye-view projection requested at or above the horizon."""


class BalanceImpossible(RuntimeError):
    """Patch sampling cannot satisfy the class-balance requirement."""


class UnusableSequence(RuntimeError):
    """No frame of the sequence yielded a usable ground plane."""
