"""Numerical tools for measuring the overcompleteness of frames.

The central object is the measure sequence ``a_n(F)``: the average of the
diagonal products ``<f_i, f~_i>`` over the nested blocks ``I_n`` of an
index set.  Its accumulation envelope (the measure profile) is what the
library reports for a truncated frame.
"""

from .errors import (CollarError, DomainError, EmptySpanError, FramekitError,
                     IncompatibleError, InputError, NotInXRError)
from .frames import (FrameAnalysis, FrameSnapshot, MeasureSequence, analyze, direct_sum,
                     measure_sequence, two_depth_stability)
from .index import IndexDecomposition, IndexRemap, QuasiMetric, get_metric
from .measure import (MeasureProfile, excess_probe, frame_measure, frames_compare, profile,
                      redundancy)
from .sequences import RealSequence, compare, is_frame_compatible, vee, wedge
from .synthesis import split_superset, synth_perp_normal

__version__ = "0.1.0"

__all__ = [
    "CollarError", "DomainError", "EmptySpanError", "FramekitError", "IncompatibleError",
    "InputError", "NotInXRError", "FrameAnalysis", "FrameSnapshot", "MeasureSequence",
    "analyze", "direct_sum", "measure_sequence", "two_depth_stability",
    "IndexDecomposition", "IndexRemap", "QuasiMetric", "get_metric", "MeasureProfile",
    "excess_probe", "frame_measure", "frames_compare", "profile", "redundancy",
    "RealSequence", "compare", "is_frame_compatible", "vee", "wedge", "split_superset",
    "synth_perp_normal",
]
