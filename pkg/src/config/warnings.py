"""
Warning filter configuration.
Import this module at the very top of each entry point.
"""
import warnings

from src.utils.errors import CoherenceWarning

# Coherence violations are per-run diagnostics, report every one
warnings.simplefilter("always", CoherenceWarning)

# soundfile looks up optional codecs on import
warnings.filterwarnings(
    "ignore",
    message=".*libsndfile.*",
    category=UserWarning,
)
