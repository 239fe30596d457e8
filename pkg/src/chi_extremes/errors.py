"""Exception hierarchy shared by all modules."""


class ChiExtremesError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(ChiExtremesError, ValueError):
    """Invalid scenario configuration or model parameters."""


class HypothesisError(ChiExtremesError):
    """Parameters fall outside the hypotheses of the requested asymptotic."""


class MissingConstantError(ChiExtremesError, LookupError):
    """A Pickands or Piterbarg constant was needed but neither supplied nor anchored."""


class SamplerError(ChiExtremesError, RuntimeError):
    """Base class for sampling failures."""


class EmbeddingError(SamplerError):
    def __init__(self, min_eigenvalue, max_eigenvalue):
        self.min_eigenvalue = float(min_eigenvalue)
        self.max_eigenvalue = float(max_eigenvalue)
        super().__init__(
            f"circulant embedding not nonnegative definite: most negative eigenvalue "
            f"{self.min_eigenvalue:.3e} (max {self.max_eigenvalue:.3e})"
        )


class FactorizationError(SamplerError):
    def __init__(self, minor_index, jitter):
        self.minor_index = int(minor_index)
        self.jitter = float(jitter)
        super().__init__(
            f"Cholesky factorization failed at leading minor {self.minor_index} "
            f"with maximal jitter {self.jitter:.3e}"
        )


class QuadratureError(ChiExtremesError, ArithmeticError):
    def __init__(self, achieved, requested):
        self.achieved = float(achieved)
        self.requested = float(requested)
        super().__init__(
            f"quadrature did not reach tolerance {requested:.1e} (achieved {achieved:.1e})"
        )
