"""Joint nonlinear dimensionality reduction and feature-level clustering."""

from basiscluster._core import *  # noqa: F401,F403
from basiscluster._core import __version__  # noqa: F401
