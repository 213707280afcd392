"""Reduced models of the stochastic Burgers equation.

This library simulates the stochastically forced viscous Burgers equation
with a pseudo-spectral ETDRK4 integrator, generates observation datasets of
its K lowest Fourier modes, fits nonlinear autoregression (NAR) closures to
those datasets by least squares, and validates the fitted models against the
full model's statistics.
"""

__all__ = [
    'common',
    'spectral',
    'forcing',
    'full_model',
    'dataset',
    'nar',
    'estimate',
    'stats',
    'experiment',
]

# Don't try to output documentation for the test module.
__pdoc__ = {'tests': False}

from sbnar.version import __version__
from sbnar import common
from sbnar import spectral
from sbnar import forcing
from sbnar import full_model
from sbnar import dataset
from sbnar import nar
from sbnar import estimate
from sbnar import stats
from sbnar import experiment
