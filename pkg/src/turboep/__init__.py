"""Expectation-propagation turbo equalization over ISI channels.

Public surface: constellations, channel model, the EP core, the three
equalizer backends, an LDPC code, the turbo loop, and the Monte Carlo
harness behind the ``turboep`` command-line tool.
"""

from .channel import (
    ChannelRealization,
    ebn0_to_noise_variance,
    load_taps,
    random_channel,
    save_taps,
    transmit,
)
from .constellation import Constellation
from .ep_core import (
    DegenerateDivisionError,
    EpDiagnostics,
    EpParams,
    Gaussian,
    gaussian_divide,
    moment_match_damp,
    outer_ep_init,
    project_prior,
    tilted_moments,
)
from .equalizers import (
    MarginalSet,
    WindowSpec,
    block_marginals,
    equalize,
    kalman_smoother_marginals,
    windowed_marginals,
)
from .harness import BerRecord, ExperimentSpec, emit_csv, read_csv, run_sweep
from .ldpc import LdpcCode, build_code, decode, encode
from .turbo import (
    FrameResult,
    TurboConfig,
    default_beta_schedule,
    run_frame,
    scheme_defaults,
)

__version__ = "0.1.0"

__all__ = [
    "BerRecord",
    "ChannelRealization",
    "Constellation",
    "DegenerateDivisionError",
    "EpDiagnostics",
    "EpParams",
    "ExperimentSpec",
    "FrameResult",
    "Gaussian",
    "LdpcCode",
    "MarginalSet",
    "TurboConfig",
    "WindowSpec",
    "block_marginals",
    "build_code",
    "decode",
    "default_beta_schedule",
    "ebn0_to_noise_variance",
    "emit_csv",
    "encode",
    "equalize",
    "gaussian_divide",
    "kalman_smoother_marginals",
    "load_taps",
    "moment_match_damp",
    "outer_ep_init",
    "project_prior",
    "random_channel",
    "read_csv",
    "run_frame",
    "run_sweep",
    "save_taps",
    "scheme_defaults",
    "tilted_moments",
    "transmit",
    "windowed_marginals",
]
