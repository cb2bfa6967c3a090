"""Lamperti transforms, self-similar Gaussian fields and partial-sum diagnostics."""

from ._lamperti import *  # noqa: F401,F403
from ._lamperti import __doc__  # noqa: F401
