"""shom: homogenization toolkit for Stokes systems with periodic coefficients.

This package contains coefficient models, the periodic cell solver, the
staggered-grid Dirichlet Stokes solver, discrete Green's functions, two-scale
expansion diagnostics and the experiment harness that measures rates and
decay exponents.
"""
