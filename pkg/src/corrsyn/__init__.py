"""corrsyn: dimensionality of deep-network representations under
correlated synaptic weights.

Submodules: numerics (quadrature, factorisation, seeded streams), ensemble
(weights and inputs), propagation (mean-field and sampled moments), stats
(order parameters, spectra), theory (large-N recursions), hebbian (on-line
trainer) and cli (experiment runner).
"""

from .ensemble import InputEnsembleSpec, LayerParams, NetworkConfig, sample_inputs, sample_network
from .errors import ConfigError, CorrsynError, DomainError, NumericalError, ScalingError
from .numerics import RandomSource, gauss_hermite
from .propagation import ActivityMoments, propagate_moments, propagate_samples, sample_moments
from .stats import layer_summary, participation_ratio
from .theory import TheoryConfig, TheoryState, run_theory

__version__ = "0.1.0"
