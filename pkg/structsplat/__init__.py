__version__ = "1.0.0"

DEFAULT_SEED = 0
