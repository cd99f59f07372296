"""Per-element automatic differentiation for mesh energies."""

from ._meshgrad import *  # noqa: F401,F403
from ._meshgrad import __version__  # noqa: F401
