from app.world.calibration import CalibrationResult, calibrate_noise_temperature, mean_refresh_divergence
from app.world.oracle import Recommendation, RecommendationWorld, largest_remainder, persona_hash
from app.world.personas import Persona, Source, generate_sock_puppet, generate_sock_puppets
from app.world.traces import PersonaImport, export_personas, import_personas

__all__ = [
    "RecommendationWorld",
    "Recommendation",
    "Persona",
    "Source",
    "PersonaImport",
    "CalibrationResult",
    "largest_remainder",
    "persona_hash",
    "generate_sock_puppet",
    "generate_sock_puppets",
    "import_personas",
    "export_personas",
    "calibrate_noise_temperature",
    "mean_refresh_divergence",
]
