"""
hosadecon - blind ultrasonic deconvolution

Estimates the transducer pulse from third-order statistics of an ensemble of
RF traces, then recovers reflectivity with a Fourier-wavelet regularized
deconvolution and reports the axial-resolution gain.
"""

__version__ = "0.1.0"
__author__ = "hosadecon developers"

from .core.config import HosaOptions, PipelineConfig, WaveletConfig, WienerConfig
from .dsp.deconvolve import forward_deconvolve
from .dsp.hosa import estimate_pulse
from .stages.pipeline_runner import PipelineRunner

__all__ = [
    "HosaOptions",
    "PipelineConfig",
    "WaveletConfig",
    "WienerConfig",
    "forward_deconvolve",
    "estimate_pulse",
    "PipelineRunner",
]
