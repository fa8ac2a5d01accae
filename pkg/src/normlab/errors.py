"""Exception types shared across the package."""


class NormlabError(Exception):
    """Base class for all package errors."""


class InvalidDescriptorError(NormlabError):
    """Norm descriptor violates its construction constraints."""


class RayError(NormlabError):
    """Gradient requested on a non-differentiability ray under the
    strict ray policy."""


class DegenerateNormError(NormlabError):
    """No regular boundary points available for sampling."""


class MonotonicityCertificateError(NormlabError):
    """No cone aperture in the grid yields a positive monotonicity
    constant; signals a broken descriptor."""


class ConstructionError(NormlabError):
    """A constructive geometric procedure failed its own postcondition."""


class MeasureError(NormlabError):
    """Invalid measure construction or query."""


class AtomBudgetError(MeasureError):
    """Generator would exceed the atom budget."""


class ResolutionError(NormlabError):
    """Requested radii fall outside the measure's trusted window."""


class UniformityError(NormlabError):
    """Operation requires a measure certified uniform and the check failed."""


class RayMassError(NormlabError):
    """Too much atom mass sits on non-differentiability rays."""

    def __init__(self, fraction, limit):
        self.fraction = fraction
        self.limit = limit
        super().__init__(
            f"ray-atom mass fraction {fraction:.3e} exceeds limit {limit:.3e}"
        )


class TouchingError(NormlabError):
    """Invalid touching-body query."""


class DichotomyViolation(NormlabError):
    """Graph scan met an edge-interior contact; carries the scan position."""

    def __init__(self, t, detail=""):
        self.t = t
        super().__init__(f"edge-interior touch at t={t!r}{': ' + detail if detail else ''}")


class ConfigError(NormlabError):
    """Experiment configuration failed validation."""
