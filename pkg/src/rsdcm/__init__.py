"""Effective connectivity from resting-state BOLD with white or AR(1) endogenous noise.

Subpackages and modules:

``balloon``    Balloon-Windkessel hemodynamics
``hemo``       FIR linearization and its Monte-Carlo prior
``dynamics``   exact sampling of the neuronal and noise dynamics
``ssm``        lifted linear state-space models
``inference``  Kalman/RTS smoothing and EM with sparse Bayesian learning
``metrics``    EC and FC comparison metrics
``harness``    synthetic studies, CSV ingestion and the ``rsdcm`` CLI
"""
from ._kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
