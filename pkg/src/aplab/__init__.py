"""Fourier-analytic tools for counting three-term progressions in densities and measures."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .group_fourier import GridDensity, Spectrum, lambda3, lambda3_direct, lambda3_spectral  # noqa: E402

__all__ = ["GridDensity", "Spectrum", "lambda3", "lambda3_direct", "lambda3_spectral", "__version__"]
