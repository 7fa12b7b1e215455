"""Domain models package."""

from .base import ArffModel
from .classify import (
    CosSinModel,
    DigitRecord,
    IdxImages,
    IdxLabels,
    OneVsAllResult,
    OverallRecord,
)
from .config import (
    ClassifierConfig,
    CutoffConfig,
    SolverConfig,
    TrainConfig,
    WalkConfig,
)
from .dataset import Dataset
from .frequency import (
    AggregatedAmplitudes,
    Frequency,
    FrequencySet,
    LatticeSpec,
    RffModel,
)
from .history import (
    EqualAmplitudeCheck,
    FrequencySnapshot,
    IterationRecord,
    PhaseTiming,
    ProjectedHistogram,
    RunHistory,
    SweepPoint,
)
from .solve import SolveResult
from .target import (
    BaseDistribution,
    FourierCoefficientTable,
    LatticeNormalDistribution,
    ParsevalReport,
    SpectrumTerm,
    StandardNormalDistribution,
    TabulatedDistribution,
    TargetSpec,
)

__all__ = [
    # Base
    "ArffModel",
    # Frequencies
    "Frequency",
    "FrequencySet",
    "LatticeSpec",
    "AggregatedAmplitudes",
    "RffModel",
    # Data
    "Dataset",
    # Targets
    "TargetSpec",
    "SpectrumTerm",
    "FourierCoefficientTable",
    "BaseDistribution",
    "StandardNormalDistribution",
    "LatticeNormalDistribution",
    "TabulatedDistribution",
    "ParsevalReport",
    # Config
    "SolverConfig",
    "CutoffConfig",
    "WalkConfig",
    "TrainConfig",
    "ClassifierConfig",
    # Solver
    "SolveResult",
    # History
    "IterationRecord",
    "PhaseTiming",
    "FrequencySnapshot",
    "EqualAmplitudeCheck",
    "RunHistory",
    "ProjectedHistogram",
    "SweepPoint",
    # Classification
    "IdxImages",
    "IdxLabels",
    "CosSinModel",
    "DigitRecord",
    "OverallRecord",
    "OneVsAllResult",
]
