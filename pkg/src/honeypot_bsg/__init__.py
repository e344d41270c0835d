"""Bayesian Stackelberg honeypot placement against multiple attackers."""

from .network import Network, case_study_network, generate_network, load_network

__version__ = "0.1.0"

__all__ = ["Network", "case_study_network", "generate_network", "load_network", "__version__"]
