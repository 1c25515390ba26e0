"""Exception types shared across the package."""


class IntegrationDiverged(RuntimeError):
    """A trajectory left the finite domain (NaN/Inf state component).

    Carries the step index and scaled time at which the first non-finite
    component appeared.
    """

    def __init__(self, step: int, time: float, message: str | None = None):
        self.step = step
        self.time = time
        super().__init__(message or f"integration diverged at step {step} (t = {time:.6g})")


class StepUnderflow(RuntimeError):
    """The adaptive integrator could not meet its tolerance at the minimum step."""

    def __init__(self, time: float):
        self.time = time
        super().__init__(f"adaptive step size underflow at t = {time:.6g}")


class InsufficientComb(ValueError):
    """Too few comb teeth for the requested estimate."""


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""
