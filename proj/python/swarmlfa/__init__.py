"""Swarm-refined latent factor analysis on sparse rating matrices."""

from ._swarmlfa import *  # noqa: F401,F403
from ._swarmlfa import __version__  # noqa: F401
