"""Case-study models: normal toy, marbles, rat tumors, attainment."""
from . import attain, marbles, normal, rats

MODEL_IDS = ("normal", "marbles", "rats", "attain")
