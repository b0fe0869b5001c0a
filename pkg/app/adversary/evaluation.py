"""
Detector evaluation on unbalanced populations and the de-obfuscation attack.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.metrics import confusion_matrix, roc_curve

from app.errors import DegenerateInputError
from app.world.personas import Persona

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalReport:
    """Counts at one threshold. Precision/recall are None when undefined (no predicted / no true positives)."""

    tp: int
    fp: int
    tn: int
    fn: int
    prevalence: float
    threshold: float

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def precision(self) -> Optional[float]:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else None

    @property
    def recall(self) -> Optional[float]:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else None

    @property
    def false_positive_rate(self) -> Optional[float]:
        return self.fp / (self.fp + self.tn) if self.fp + self.tn else None

    def to_row(self) -> Dict[str, object]:
        return {
            **asdict(self),
            "n": self.n,
            "precision": self.precision,
            "recall": self.recall,
            "false_positive_rate": self.false_positive_rate,
        }


def report_from_predictions(labels: Sequence[int], predictions: Sequence[int], threshold: float = 0.5) -> EvalReport:
    labels = np.asarray(labels, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    if labels.size == 0:
        raise DegenerateInputError("empty evaluation population")
    tn, fp, fn, tp = confusion_matrix(labels, predictions, labels=[0, 1]).ravel()
    return EvalReport(int(tp), int(fp), int(tn), int(fn), float(labels.mean()), threshold)


def precision_at_prevalence(tpr: float, fpr: float, prevalence: float) -> float:
    """Bayes precision of a detector with fixed TPR/FPR in a population with the given prevalence."""
    if not 0.0 < prevalence <= 1.0:
        raise DegenerateInputError("prevalence must lie in (0, 1]")
    hits = tpr * prevalence
    alarms = hits + fpr * (1.0 - prevalence)
    if alarms == 0:
        raise DegenerateInputError("precision undefined: the detector never fires")
    return hits / alarms


def prevalence_curve(tpr: float, fpr: float, prevalences: Sequence[float]) -> List[Dict[str, float]]:
    return [{"prevalence": p, "precision": precision_at_prevalence(tpr, fpr, p), "recall": tpr}
            for p in sorted(prevalences)]


def population_at_prevalence(positives: Sequence, negatives: Sequence, prevalence: float,
                             rng: np.random.Generator) -> Tuple[list, np.ndarray]:
    """
    Subsample a test population with the requested share of positives,
    keeping as many items as the scarcer side allows.
    """
    if not 0.0 < prevalence < 1.0:
        raise DegenerateInputError("prevalence must lie in (0, 1)")
    if not positives or not negatives:
        raise DegenerateInputError("need both positive and negative personas")
    n_neg = len(negatives)
    n_pos = int(round(prevalence / (1.0 - prevalence) * n_neg))
    if n_pos > len(positives):
        n_pos = len(positives)
        n_neg = min(len(negatives), int(round(n_pos * (1.0 - prevalence) / prevalence)))
    n_pos = max(1, n_pos)
    pos_idx = np.sort(rng.choice(len(positives), size=n_pos, replace=False))
    neg_idx = np.sort(rng.choice(len(negatives), size=n_neg, replace=False))
    items = [positives[i] for i in pos_idx] + [negatives[i] for i in neg_idx]
    labels = np.concatenate([np.ones(n_pos), np.zeros(n_neg)])
    return items, labels


def roc_points(labels: Sequence[int], scores: Sequence[float]) -> List[Dict[str, float]]:
    labels = np.asarray(labels)
    if labels.min() == labels.max():
        return []
    fpr, tpr, thresholds = roc_curve(labels, np.asarray(scores))
    return [{"threshold": float(t), "fpr": float(f), "tpr": float(r)} for f, r, t in zip(fpr, tpr, thresholds)]


@dataclass
class DetectorEvaluation:
    report: EvalReport
    scores: np.ndarray
    labels: np.ndarray
    roc: List[Dict[str, float]]


def evaluate_detector(detector, sequences: Sequence[Sequence[int]], labels: Sequence[int],
                      embeddings: np.ndarray, threshold: float = 0.5, batch_size: int = 256) -> DetectorEvaluation:
    """Persona-level evaluation of a stealth detector on a labelled population."""
    labels = np.asarray(labels, dtype=np.int64)
    if len(sequences) == 0:
        raise DegenerateInputError("empty evaluation population")
    scores = []
    for start in range(0, len(sequences), batch_size):
        chunk = sequences[start:start + batch_size]
        scores.append(detector.predict_proba([embeddings[np.asarray(s, dtype=np.int64)] for s in chunk]))
    scores = np.concatenate(scores)
    report = report_from_predictions(labels, (scores >= threshold).astype(np.int64), threshold)
    logger.info("Detector at prevalence %.2f: precision %s, recall %s", report.prevalence,
                _fmt(report.precision), _fmt(report.recall))
    return DetectorEvaluation(report=report, scores=scores, labels=labels, roc=roc_points(labels, scores))


def evaluate_tagger(detector, personas: Sequence[Persona], embeddings: np.ndarray,
                    threshold: float = 0.5) -> DetectorEvaluation:
    """Per-video evaluation of a de-obfuscation tagger pooled over all entries."""
    if not personas:
        raise DegenerateInputError("empty evaluation population")
    probs = detector.predict_proba([embeddings[np.asarray(p.video_ids, dtype=np.int64)] for p in personas])
    scores = np.concatenate(probs)
    labels = np.concatenate([p.obfuscation_mask() for p in personas]).astype(np.int64)
    report = report_from_predictions(labels, (scores >= threshold).astype(np.int64), threshold)
    logger.info("Tagger: precision %s, recall %s over %d videos", _fmt(report.precision),
                _fmt(report.recall), report.n)
    return DetectorEvaluation(report=report, scores=scores, labels=labels, roc=roc_points(labels, scores))


def _fmt(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.2%}"


@dataclass(frozen=True)
class DeobfuscationResult:
    persona: Persona
    flagged: np.ndarray
    removed_user: int
    removed_obfuscation: int
    user_total: int

    @property
    def collateral_damage(self) -> float:
        """Share of the user's own videos the filter threw away."""
        return self.removed_user / self.user_total if self.user_total else 0.0


def deobfuscate(persona: Persona, detector, embeddings: np.ndarray, threshold: float = 0.5) -> DeobfuscationResult:
    """Drop every entry the tagger flags; only video ids are shown to the detector."""
    if len(persona) == 0:
        raise DegenerateInputError("cannot filter an empty persona")
    probs = detector.predict_proba([embeddings[np.asarray(persona.video_ids, dtype=np.int64)]])[0]
    flagged = np.asarray(probs) >= threshold
    keep = [i for i in range(len(persona)) if not flagged[i]]
    filtered = Persona(tuple(persona.video_ids[i] for i in keep), tuple(persona.sources[i] for i in keep),
                       persona.user_id)
    obf = persona.obfuscation_mask()
    return DeobfuscationResult(
        persona=filtered,
        flagged=flagged,
        removed_user=int(np.sum(flagged & ~obf)),
        removed_obfuscation=int(np.sum(flagged & obf)),
        user_total=int(np.sum(~obf)),
    )
