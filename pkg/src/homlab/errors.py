"""Exception types shared across the package.

Each error carries enough context (generation, window index, time) for a
sweep driver to report which point of an experiment failed.
"""


class HomlabError(Exception):
    """Base class for all package errors."""


class ScaleOverflowError(HomlabError):
    """lambda_q left the range where a float64 ceiling is exact."""

    def __init__(self, q, value):
        self.q = q
        self.value = value
        super().__init__(
            f"scale overflow at q={q}: lambda0^(b^q) = {value:.6g} exceeds 2^53")


class ResolutionError(HomlabError):
    """A grid or sample count is too coarse for the requested scales."""


class StiffnessError(HomlabError):
    """Characteristic integration failed (step underflow or non-finite state)."""

    def __init__(self, q, iota, t, reason):
        self.q, self.iota, self.t = q, iota, t
        super().__init__(f"characteristics failed at q={q}, iota={iota}, t={t:.6g}: {reason}")


class StepSizeError(HomlabError):
    """Finite-difference half-width outside its admissible window."""


class MissingFlowError(HomlabError):
    """A window that is active at time t has no local flow supplied."""


class BlowUpError(HomlabError):
    """The time stepper produced NaN or Inf."""

    def __init__(self, step, t, dt):
        self.step, self.t, self.dt = step, t, dt
        super().__init__(f"non-finite solution at step {step} (t={t:.6g}, dt={dt:.3g})")


class ConfigError(HomlabError):
    """Malformed or incomplete experiment configuration."""
