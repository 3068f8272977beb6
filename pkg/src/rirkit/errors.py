"""Exception types raised by the simulation and analysis pipeline."""


class RirkitError(Exception):
    """Base class for all rirkit-specific errors."""


class UnreachableT60Error(RirkitError, ValueError):
    """Requested t60_target_s is below what the room can realize (alpha > 0.99)."""

    def __init__(self, target_t60: float, min_t60: float):
        self.target_t60 = target_t60
        self.min_t60 = min_t60
        super().__init__(
            f"t60_target_s={target_t60:.6g} s is unreachable for this room; "
            f"minimum achievable T60 is {min_t60:.6g} s (absorption capped at 0.99)"
        )


class InfiniteT60Error(RirkitError, ValueError):
    """All surface absorption is zero, so the predicted decay time is infinite."""


class SilentIrError(RirkitError, ValueError):
    """Impulse response channel is all zeros; no energy decay can be computed."""


class InsufficientDecayError(RirkitError, ValueError):
    """Energy decay curve never reaches the level required by the estimator."""

    def __init__(self, required_db: float, reached_db: float):
        self.required_db = required_db
        self.reached_db = reached_db
        super().__init__(
            f"decay curve reaches only {reached_db:.2f} dB; "
            f"{required_db:.2f} dB is required for the fit"
        )


class MetadataRequiredError(RirkitError, ValueError):
    """Operation needs source/receiver geometry that the IR metadata does not carry."""


class IrTooShortError(RirkitError, ValueError):
    """Requested IR length ends before the direct sound would arrive."""


class DegenerateGeometryError(RirkitError, ValueError):
    """Source/receiver configuration is geometrically degenerate (e.g. source inside a receiver sphere)."""


class RateMismatchError(RirkitError, ValueError):
    """Two audio buffers that must share a sample rate do not."""

    def __init__(self, rate_a: int, rate_b: int):
        self.rate_a = rate_a
        self.rate_b = rate_b
        super().__init__(f"sample rate mismatch: {rate_a} Hz vs {rate_b} Hz (resampling is out of scope)")


class SilentSignalError(RirkitError, ValueError):
    """Signal power is zero, so an SNR cannot be defined."""


class SamplingFailedError(RirkitError, RuntimeError):
    """Rejection sampling exceeded its attempt cap."""
