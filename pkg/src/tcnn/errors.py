"""Exception taxonomy shared across the package."""


class ShapeError(ValueError):
    """Tensor or layer shapes are inconsistent with the requested operation."""


class DomainError(ValueError):
    """An argument is outside the operation's domain (e.g. low >= high)."""


class ContractError(RuntimeError):
    """Artifacts from a forward pass do not match the backward call."""


class FormatError(ValueError):
    """A data file does not conform to its declared on-disk format."""
