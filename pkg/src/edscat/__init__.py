"""Direct and inverse scattering for an energy-dependent 2x2 system.

Modules
-------
model        grids, potential pairs, scattering data, triplets, file format
direct       Jost solutions, scattering coefficients, bound states
gauge        phase function and the maps between the three systems
marchenko    Marchenko kernels, Nystrom solver, separable closed form
inverse      two-gauge inversion of energy-dependent data
altmarchenko alternate scalar Marchenko method
cli          batch command-line front end
"""

__version__ = "0.1.0"
