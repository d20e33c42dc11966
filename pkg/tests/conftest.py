import sys
from pathlib import Path

from hypothesis import settings

# Make the oracle helpers importable from every test module.
sys.path.insert(0, str(Path(__file__).parent))

# Keep property runs reproducible across invocations.
settings.register_profile("deterministic", derandomize=True)
settings.load_profile("deterministic")
