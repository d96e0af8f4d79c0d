"""Geyser eruption-state classification from noisy seismic signals.

The pipeline denoises a continuous signal in two stages (Butterworth
high-pass, then a prediction-error filter built on an AR noise model),
slices it into labeled windows, and classifies each window as remnant
noise, eruption precursor, or eruption in progress.
"""

from .errors import ConfigError, DataError, GeyserStateError, NumericError

__all__ = [
    "ConfigError",
    "DataError",
    "GeyserStateError",
    "NumericError",
    "__version__",
]

__version__ = "1.0.0"
