"""nlcflow: spectral-Galerkin simulator for regularized compressible
nematic liquid-crystal flow, with estimate-tracking diagnostics."""

__version__ = "0.1.0"
