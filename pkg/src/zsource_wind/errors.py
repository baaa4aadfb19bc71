"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain of a model equation."""


class SingularityError(DomainError):
    """Shoot-through duty at or beyond the boost singularity (d_s >= 0.5)."""


class ConstraintViolation(ValueError):
    """Shoot-through duty exceeds the zero-state time left by the modulation signal."""


class PreconditionError(ValueError):
    pass


class ScenarioError(ValueError):
    """Invalid scenario file, field, or override."""


class SimulationAbort(RuntimeError):
    def __init__(self, message: str, t: float):
        super().__init__(f"{message} at t={t:.9g} s")
        self.t = t
