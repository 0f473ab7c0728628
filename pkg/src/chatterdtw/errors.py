"""Exception types raised across the toolkit."""


class ChatterDtwError(Exception):
    pass


class SignalFormatError(ChatterDtwError, ValueError):
    """A signal or label file could not be parsed."""


class EmptyInput(SignalFormatError):
    pass


class LabelError(ChatterDtwError, ValueError):
    pass


class OverlappingRegions(LabelError):
    pass


class CorruptMatrix(ChatterDtwError, ValueError):
    pass


class DegenerateSegment(ChatterDtwError, ValueError):
    """Raised for constant segments that cannot be z-normalized."""


class InfeasibleWindow(ChatterDtwError, ValueError):
    """No warping path satisfies the requested band or slope constraint."""


class UnknownId(ChatterDtwError, KeyError):
    pass
