import os
from pathlib import Path

__version__ = "0.3.0"

BASE_CACHE_PATH = os.path.join(str(Path.home()), ".cache/pycmc/")
