from app.harness.acceptance import CheckResult, run_checks
from app.harness.artifacts import RunArtifacts
from app.harness.experiments import (
    ObfuscationEvaluation,
    evaluate_obfuscators,
    measure_privacy,
    personalization_study,
    sweep_alpha,
)
from app.harness.pipeline import PipelineResult, resolve_stages, run_pipeline
from app.harness.stages import CORE_STAGES, STAGES, STUDY_STAGES, BaseStage, PipelineContext
from app.harness.tiny_world import MIReport, build_joint, mi_tiny_world_study

__all__ = [
    "BaseStage",
    "CheckResult",
    "CORE_STAGES",
    "MIReport",
    "ObfuscationEvaluation",
    "PipelineContext",
    "PipelineResult",
    "RunArtifacts",
    "STAGES",
    "STUDY_STAGES",
    "build_joint",
    "evaluate_obfuscators",
    "measure_privacy",
    "mi_tiny_world_study",
    "personalization_study",
    "resolve_stages",
    "run_checks",
    "run_pipeline",
    "sweep_alpha",
]
