"""Subcarrier and power allocation for the uplink of multi-cell OFDMA networks.

Submodules
----------
model     core types, interference and throughput evaluation, validation
chanmodel cell geometry, user placement and channel gain generation
bounds    greedy upper/lower throughput bounds and diagnostics
gp        posynomial algebra and geometric-programming solvers
schemes   centralized allocation schemes (iterative benchmark and low-complexity)
distopt   distributed per-subcarrier power control via dual decomposition
optimal   exhaustive-search baseline for tiny instances
harness   seeded Monte-Carlo experiment runner
cli       command-line entry point
"""

__version__ = "0.1.0"
