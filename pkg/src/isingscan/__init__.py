"""Scan tests for structured signals in Ising models.

Submodules
----------
model          graphs, fields and model specifications
exact          brute-force oracle and Curie–Weiss one-dimensional integrals
samplers       Glauber, exact Curie–Weiss and Swendsen–Wang samplers
meanfield      m(β), sharp constants and scan cutoffs
classes        candidate-support families
detectors      scan statistics and decision rules
susceptibility χ estimation on lattices
adaptive       unknown-β pipeline
risk           Monte Carlo risk sweeps
invariants     oracle-backed invariant suite
cli            command-line entry point
"""
from .adaptive import adaptive_test, fit_beta_pseudolikelihood, regime_classifier
from .classes import (ScanClass, apply_signal, build_disjoint_class, build_rectangle_class, build_scan_grid,
                      disjoint_blocks, gamma_distance, greedy_cover, RectangleGridParams)
from .detectors import (TestDecision, bonferroni_combine, centered_sum_test, high_temp_scan_test,
                        lattice_scan_test, low_temp_randomized_scan_test, scan_statistics)
from .exact import auxiliary_ratio_integral, exact_ratio, exact_summary, exact_tail
from .meanfield import CutoffSpec, scan_cutoff, sharp_constant, signal_strength_for_constant, solve_m
from .model import (CouplingGraph, ModelSpec, SignalSpec, build_complete, build_erdos_renyi, build_lattice,
                    build_random_regular, hamiltonian, local_field)
from .risk import ExperimentPlan, run_risk, sweep_phase_diagram
from .samplers import (ChainConfig, curie_weiss_exact_sample, fk_ising_bond_sample, glauber_sample,
                       swendsen_wang_sample)
from .susceptibility import BETA_C_2D, chi_monotonicity_sweep, estimate_chi

__version__ = "0.1.0"
