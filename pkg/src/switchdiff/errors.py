"""Exception types shared across the package."""


class SwitchDiffError(Exception):
    """Base class for all package errors."""


class ConfigError(SwitchDiffError):
    """A simulation configuration is inconsistent or cannot be satisfied."""


class TailUnresolvable(SwitchDiffError):
    """A regime-row series could not be certified within budget.

    `definitive` distinguishes "this tail can never be certified for the
    requested parameters" from "not certified yet at this truncation".
    """

    def __init__(self, message, definitive=True):
        super().__init__(message)
        self.definitive = definitive


class NonFiniteError(SwitchDiffError):
    """A state coordinate became NaN or infinite during integration.

    Carries the failure time and the finite prefix of the segment so the
    caller can treat the event as an explosion candidate.
    """

    def __init__(self, time, times, states):
        super().__init__(f"state became non-finite at t={time!r}")
        self.time = time
        self.times = times
        self.states = states


class TruncationLeak(SwitchDiffError):
    """Simulated regime mass above the oracle truncation exceeded tolerance."""
