"""Exception types shared across the package."""


class HeatplanError(Exception):
    """Base class for all errors raised by heatplan."""


class ParameterError(HeatplanError):
    """A parameter is outside its documented range or has the wrong shape."""


class DomainError(HeatplanError):
    """A continuous point lies outside the map's world rectangle."""


class GenerationError(HeatplanError):
    """A map or scenario generator could not satisfy its constraints."""


class MapFormatError(HeatplanError):
    """A map or scenario document failed to parse.

    ``field`` names the offending location, e.g. ``"occupancy[3]"`` or
    ``"robots[1].start"``.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class UnknownLabelError(HeatplanError):
    """An instruction referenced a label no region carries."""

    def __init__(self, token, available):
        self.token = token
        self.available = tuple(sorted(set(available)))
        super().__init__(
            f"no region labeled {token!r}; available labels: {', '.join(self.available) or '(none)'}"
        )


class PlacementError(HeatplanError):
    """A heat source cell falls on an obstacle."""


class DegenerateFieldError(HeatplanError):
    """A heat state carries no mass, so no score field exists."""


class SingularConfigurationError(HeatplanError):
    """Two robots occupy the same point; pairwise terms are undefined."""


class RenderError(HeatplanError):
    """A requested render layer is missing its input data."""

    def __init__(self, layer, message=""):
        self.layer = layer
        super().__init__(f"layer {layer!r}: {message}" if message else f"missing data for layer {layer!r}")
