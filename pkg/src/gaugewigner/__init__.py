"""Gauge-invariant Wigner (Weyl-Stratonovich) phase-space dynamics.

Modules
-------
grid        phase-space grids and FFT conventions
fields      electromagnetic configurations, line averages, scenario catalog
transforms  Weyl, Weyl-Stratonovich and related transforms
kernels     weak-form kernels and sinc-type operators
evolve      weak-form integrator, Schrodinger and Liouville oracles
observe     densities, currents, conservation and gauge diagnostics
app         configuration, run orchestration, export and CLI
"""

__version__ = "0.1.0"
