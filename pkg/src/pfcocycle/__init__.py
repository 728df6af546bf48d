"""Transfer-operator cocycles for random expanding circle maps.

The package discretises density-pushforward operators into Fourier-space
matrix cocycles, extracts Lyapunov exponents and invariant splittings by QR
and graph-transform methods, and runs the stability sweeps (map perturbation,
Cesaro-smoother order) that probe how robust those objects are.
"""

__all__ = ["grassmann", "harness", "maps", "oseledets", "report", "spectral", "transfer"]
__version__ = "0.1.0"
