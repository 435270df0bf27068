"""Feature reweighting for aligning representations with similarity judgments."""

from repalign._core import *  # noqa: F401,F403
from repalign._core import __version__  # noqa: F401
