"""DTW similarity matrices and kNN classification of machining chatter."""
from .dtw import DtwConfig, DtwResult, WarpingPath, coarsen, dtw_distance, dtw_exact, fastdtw, local_distance
from .errors import (
    CorruptMatrix,
    DegenerateSegment,
    EmptyInput,
    InfeasibleWindow,
    LabelError,
    OverlappingRegions,
    SignalFormatError,
    UnknownId,
)
from .signal_io import DistanceMatrix, LabeledSegment, LabelRegion, Tag, TimeSeries

__version__ = "0.1.0"
