from .artifact import ModelArtifact, load_model, save_model
from .pipeline import ExperimentPipeline, ExperimentResult, compare_optimizers, evaluate
from .schema import ExperimentConfig
from .training import TrainReport, train

__all__ = [
    "ExperimentConfig",
    "ExperimentPipeline",
    "ExperimentResult",
    "ModelArtifact",
    "TrainReport",
    "compare_optimizers",
    "evaluate",
    "load_model",
    "save_model",
    "train",
]
