"""photonstat: photon-stream simulation and TCSPC analysis toolkit.

Simulates a blinking pulsed single-photon emitter (multi-exciton Auger
physics, HBT detection) and analyzes photon streams: pulsed g2 with
background subtraction, blinking envelope, multi-exponential lifetime fits,
FLID, and saturation curves.
"""

from . import errors
from .correlation import (G2Envelope, G2Histogram, IntensityTrace,
                          StateLabels, bin_intensity, g2_envelope, g2_pulsed,
                          g2_pulsed_bruteforce, intensity_histogram,
                          subtract_background, subtract_background_rho,
                          telegraph_envelope, threshold_states)
from .emitter import (DetectorParams, EmitterParams, PowerLawBlinking,
                      SimConfig, TelegraphBlinking, expected_rate,
                      simulate_stream)
from .fitting import (FitProblem, FitResult, SaturationFit, SaturationPoint,
                      fit_nonlinear, fit_saturation, saturation_model)
from .lifetime_flid import (DecayHistogram, FlidGrid, MultiExpFit,
                            bin_lifetime_estimate, build_flid,
                            decay_histogram, fit_multiexp,
                            intensity_lifetime_correlation,
                            truncated_exp_mean)
from .photon_stream import (PhotonStream, StreamHeader, decode_stream,
                            encode_stream, merge_channels, read_stream,
                            write_stream)

__version__ = "0.1.0"

__all__ = [
    "errors", "DetectorParams", "EmitterParams", "PowerLawBlinking",
    "SimConfig", "TelegraphBlinking", "expected_rate", "simulate_stream",
    "PhotonStream", "StreamHeader", "decode_stream", "encode_stream",
    "merge_channels", "read_stream", "write_stream",
    "G2Envelope", "G2Histogram", "IntensityTrace", "StateLabels",
    "bin_intensity", "g2_envelope", "g2_pulsed", "g2_pulsed_bruteforce",
    "intensity_histogram", "subtract_background", "subtract_background_rho",
    "telegraph_envelope", "threshold_states",
    "FitProblem", "FitResult", "SaturationFit", "SaturationPoint",
    "fit_nonlinear", "fit_saturation", "saturation_model",
    "DecayHistogram", "FlidGrid", "MultiExpFit", "bin_lifetime_estimate",
    "build_flid", "decay_histogram", "fit_multiexp",
    "intensity_lifetime_correlation", "truncated_exp_mean", "__version__",
]
