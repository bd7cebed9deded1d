"""Privacy-preserving remote photoplethysmography toolkit.

Turns facial video into an identity-destroying but pulse-preserving
representation (ROI assembly, keyed pixel shuffling, Gaussian blur),
estimates heart rate from the perturbed video with classical mean-trace
algorithms (CHROM, POS), and benchmarks the transform against competing
privacy perturbations.
"""

__version__ = "0.1.0"

from .errors import DataError, NumericError, PulseVeilError
from .model import (
    Clip,
    HrReport,
    KeyPolicy,
    LandmarkSet,
    PermutationKey,
    PerturbSpec,
    PpgTrace,
    clip_from_frames,
    validate_clip,
)

__all__ = [
    "__version__",
    "Clip",
    "DataError",
    "HrReport",
    "KeyPolicy",
    "LandmarkSet",
    "NumericError",
    "PermutationKey",
    "PerturbSpec",
    "PpgTrace",
    "PulseVeilError",
    "clip_from_frames",
    "validate_clip",
]
