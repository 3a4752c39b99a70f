"""Finite-state dimension of binary sequences via fair Markov chains.

Modules: sequence (bit sources), machine (automata, selectors, bettors),
markov (induced chains and stationary laws), empirical (run statistics),
infotheory (entropy, KL), dimension (estimators and martingales),
selection (selectors and the selection inequality), cli.
"""

__version__ = "0.1.0"
