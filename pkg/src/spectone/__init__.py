"""Barta-type fundamental-tone bounds for submanifolds with convex ambient fields."""

from . import ambient, catalog, fields, immersion, mesh, spectrum, tone
from .errors import *  # noqa: F401,F403

__version__ = "0.1.0"
