from app.denoiser.model import DenoiserNetwork, baseline_surro_den, denoise
from app.denoiser.repopulation import RepopulationResult, repopulate
from app.denoiser.training import DenoiserDataset, DenoiserTrainingResult, predict_dataset, train_denoiser

__all__ = [
    "DenoiserNetwork",
    "DenoiserDataset",
    "DenoiserTrainingResult",
    "RepopulationResult",
    "baseline_surro_den",
    "denoise",
    "predict_dataset",
    "repopulate",
    "train_denoiser",
]
