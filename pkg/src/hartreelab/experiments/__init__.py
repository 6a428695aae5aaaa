from .config import ExperimentConfig, load_config
from .orbit import OrbitDistanceResult, orbit_distance

__all__ = ["ExperimentConfig", "load_config", "OrbitDistanceResult", "orbit_distance"]
