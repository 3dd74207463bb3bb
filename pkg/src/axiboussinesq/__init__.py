"""Axisymmetric swirl-free Navier-Stokes-Boussinesq numerics.

Submodules are imported on demand (``from axiboussinesq import evolve``) so
that the command-line entry point can set thread counts before numpy loads.
"""

__version__ = "0.1.0"

__all__ = ["cylgrid", "diffops", "linsolve", "singell", "lpbesov", "coupling", "evolve",
           "monitor", "config", "io", "cli", "random_fields", "errors"]
