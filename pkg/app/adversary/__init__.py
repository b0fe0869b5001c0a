from app.adversary.detectors import DeobfDetector, StealthDetector
from app.adversary.evaluation import (
    DeobfuscationResult,
    DetectorEvaluation,
    EvalReport,
    deobfuscate,
    evaluate_detector,
    evaluate_tagger,
    population_at_prevalence,
    precision_at_prevalence,
    prevalence_curve,
    report_from_predictions,
)
from app.adversary.training import (
    DetectorTrainingResult,
    stealth_examples,
    train_deobf_detector,
    train_stealth_detector,
)

__all__ = [
    "DeobfDetector",
    "StealthDetector",
    "DeobfuscationResult",
    "DetectorEvaluation",
    "DetectorTrainingResult",
    "EvalReport",
    "deobfuscate",
    "evaluate_detector",
    "evaluate_tagger",
    "population_at_prevalence",
    "precision_at_prevalence",
    "prevalence_curve",
    "report_from_predictions",
    "stealth_examples",
    "train_deobf_detector",
    "train_stealth_detector",
]
