"""Numerical laboratory for the fourth-order Alt-Caffarelli problem.

Energy: E(u; D) = ∫_D |Δu|^2 + χ_{u != 0}. Modules:

- ``angular_modes``: buckling eigenbasis on segments, t1, homogeneous profiles
- ``weiss_energy``: E, W, N, R, cylinder energies, Goursat closed forms
- ``epiperimetric``: competitor constructions and the energy-decay check
- ``fbp_solver``: discrete minimizer on the unit disk
- ``buckling``: first buckling eigenvalue of clamped plates
- ``cli``: batch runner
"""

__version__ = "0.1.0"
