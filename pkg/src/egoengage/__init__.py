"""Detection of heightened first-person engagement intervals in egocentric
video, from grid-quantized optical-flow motion cues.

The pipeline scores frames with a motion-descriptor random forest, turns the
scores into variable-length interval proposals via level sets at the decile
thresholds, rescores each proposal with a temporal-pyramid interval forest,
and fuses everything into a calibrated, consistent prediction set.
"""

from . import (
    cli,
    descriptor,
    errors,
    flowgrid,
    forest,
    groundtruth,
    intervals,
    metrics,
    pipeline,
    proposer,
    synth,
)
from .intervals import Interval, IntervalSet

__version__ = "0.1.0"

__all__ = [
    "cli",
    "descriptor",
    "errors",
    "flowgrid",
    "forest",
    "groundtruth",
    "intervals",
    "metrics",
    "pipeline",
    "proposer",
    "synth",
    "Interval",
    "IntervalSet",
    "__version__",
]
