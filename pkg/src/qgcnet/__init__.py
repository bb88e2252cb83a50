"""Granger and quantile-Granger financial networks.

Mean (Lasso) and tail (Lasso quantile regression) lead-lag networks from a
return panel, with GARCH prefiltering, degree summaries, a hub-network
simulation study and a Monte Carlo check of the quantile limit law.
"""
from .core import Method, Network, ReturnPanel, Window, validate_panel
from .networks import CVConfig, estimate_network, rolling_networks
from .qreg import QRProblem, solve_qr, solve_qr_lasso
from .linreg import LSProblem, solve_lasso, solve_ols
from .garch import fit_garch11, filter_panel
from .sim import HubSimConfig, run_experiment, run_replicates
from .montecarlo import QVARScenario, empirical_limit_check

__version__ = "0.1.0"

__all__ = [
    "CVConfig",
    "HubSimConfig",
    "LSProblem",
    "Method",
    "Network",
    "QRProblem",
    "QVARScenario",
    "ReturnPanel",
    "Window",
    "empirical_limit_check",
    "estimate_network",
    "filter_panel",
    "fit_garch11",
    "rolling_networks",
    "run_experiment",
    "run_replicates",
    "solve_lasso",
    "solve_ols",
    "solve_qr",
    "solve_qr_lasso",
    "validate_panel",
]
