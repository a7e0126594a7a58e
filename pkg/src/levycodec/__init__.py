"""Exit-time coding of Levy process paths under L^p distortion."""

from .codec import (
    CodecParams,
    JumpRecord,
    Reconstruction,
    Truncation,
    audit_bit_bound,
    decode,
    encode_path,
    encode_truncated,
)
from .levy_model import (
    CompoundPoisson,
    GammaStandard,
    GaussianOnly,
    LevyTriplet,
    Stable,
    drift_compensation,
    f1,
    f2,
    f_total,
    tail_mass,
)
from .path_sim import CadlagPath, SimConfig, lp_distance, simulate, value_at

__version__ = "0.1.0"
