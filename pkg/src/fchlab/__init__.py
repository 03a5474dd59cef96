"""Bilayer interfaces in the functionalized Cahn-Hilliard gradient flow.

Modules
-------
well      double-well potential and its admissibility checks
profile   homoclinic bilayer profile, linearized operator and scalar constants
curve     meander-parameterized curves, curvature and mode projections
field     periodic grids, bilayer synthesis, energy and chemical potential
pdeflow   mass-preserving gradient flow time stepping
rclflow   reduced curve flow and meander ODE
extract   interface extraction and parameter fits
cli       experiment presets
"""

from .well import WellSpec, eval_well, validate_well
from .profile import Profile1D, LineOperator, ScalarConstants, build_phi0, build_constants, moments, solve_L0
from .curve import ModeBasis, MeanderParams, build_curve, curvature, galerkin_project, xi_functions
from .field import BilayerProfiles, Grid2D, synthesize_bilayer, chemical_potential, fch_energy
from .pdeflow import PdeConfig, Scheme, run, step
from .rclflow import RclConfig, RclState, run_reduced, normal_velocity, meander_rhs, p0_star, slaved_sigma
from .extract import ExtractConfig, locate_interface, fit_modes

__version__ = "0.1.0"
