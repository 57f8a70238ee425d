import logging

__version__ = "0.1.0"

# Shared constants
LOG = logging.getLogger(__name__)
SCHEMA_VERSION = 1
SIGNIFICANCE_LEVEL = 0.05
DEFAULT_PERMUTATIONS = 10_000
DEFAULT_BOOTSTRAP = 5_000
DEFAULT_GRID_POINTS = 101
DEFAULT_SEED = 20240601

from .game_model import Condition, Family, Framing, GameSpec, Individuation, make_game
