"""Pseudo-spectral 2D Boussinesq channel solver with temperature-dependent
viscosity/diffusivity and a verification harness for its decay, absorbing-ball
and continuity properties."""

__version__ = "0.1.0"
