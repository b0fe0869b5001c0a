from app.surrogate.model import SurrogateNetwork, surrogate_predict
from app.surrogate.training import SurrogateTrainingResult, predict_batch, train_surrogate

__all__ = ["SurrogateNetwork", "SurrogateTrainingResult", "surrogate_predict", "train_surrogate", "predict_batch"]
