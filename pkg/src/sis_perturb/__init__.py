"""Stochastically perturbed SIS epidemic model: simulation, long-run
classification and perturbation-series moment corrections."""

__version__ = "0.1.0"
