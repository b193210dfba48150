"""
Experiments exposed as CLI subcommands
"""

from .phase_experiments import PhaseDiagramExperiment, SpontaneousMagnetizationExperiment
from .polymer_experiments import ClusterExpandExperiment, KPCheckExperiment
from .monomial_experiment import DecomposeExperiment
from .effective_experiments import EffMinimizeExperiment, EnsembleGapExperiment, ThetaScanExperiment
from .mc_experiments import GammaSweepExperiment, McRunExperiment

ALL_EXPERIMENTS = [
    PhaseDiagramExperiment,
    SpontaneousMagnetizationExperiment,
    ClusterExpandExperiment,
    KPCheckExperiment,
    DecomposeExperiment,
    EffMinimizeExperiment,
    EnsembleGapExperiment,
    ThetaScanExperiment,
    McRunExperiment,
    GammaSweepExperiment,
]

__all__ = [
    'PhaseDiagramExperiment',
    'SpontaneousMagnetizationExperiment',
    'ClusterExpandExperiment',
    'KPCheckExperiment',
    'DecomposeExperiment',
    'EffMinimizeExperiment',
    'EnsembleGapExperiment',
    'ThetaScanExperiment',
    'McRunExperiment',
    'GammaSweepExperiment',
    'ALL_EXPERIMENTS',
]
