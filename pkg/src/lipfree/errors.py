"""Exception types shared across the package."""


class StructuralError(ValueError):
    """Input violates a structural precondition (shape, axioms, containment)."""


class ResourceError(RuntimeError):
    """A configured size cap would be exceeded."""
