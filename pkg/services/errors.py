"""Exceptions raised by the planning services.

The command layer maps these onto process exit codes, the same way the
integration services turned failures into error-log rows.
"""


class PlannerError(Exception):
    """Base class for every planning failure"""

    error_type = 'Planner Error'


class GroupMismatch(PlannerError):
    """Operands belong to different groups or algebras"""

    error_type = 'Group Mismatch'


class InvalidAxis(PlannerError):
    """A rotation axis that should be unit length is not"""

    error_type = 'Invalid Axis'


class InvalidRotation(PlannerError):
    """A 3x3 matrix that is not a proper rotation"""

    error_type = 'Invalid Rotation'


class InvalidPlan(PlannerError):
    """Multiindex and coasting times do not describe a plan"""

    error_type = 'Invalid Plan'


class SpecError(PlannerError):
    """A system or target specification failed validation"""

    error_type = 'Specification Error'


class Uncontrollable(PlannerError):
    """The Lie closure of the input fields is not full rank"""

    error_type = 'Uncontrollable'

    def __init__(self, message, system_class=None):
        super().__init__(message)
        self.system_class = system_class


class OutOfCatalog(PlannerError):
    """A controllable system that matches none of the canonical families"""

    error_type = 'OutOfCatalog'

    def __init__(self, message, system_class=None):
        super().__init__(message)
        self.system_class = system_class


class OutsideDomain(PlannerError):
    """Target lies outside the neighborhood where a local inverse is valid"""

    error_type = 'OutsideDomain'

    def __init__(self, message, verdict=None):
        super().__init__(message)
        self.verdict = verdict


class DegenerateL(PlannerError):
    """Negative discriminant in the two-chord solution of the T2 planner"""

    error_type = 'DegenerateL'

    def __init__(self, message, discriminant=None):
        super().__init__(message)
        self.discriminant = discriminant


class ResidualTooLarge(PlannerError):
    """A computed plan misses its target by more than the tolerance"""

    error_type = 'ResidualTooLarge'

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
