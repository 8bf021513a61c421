"""Isoperimetric comparison toolkit for submanifolds with controlled radial tangency."""

from .constellation import Constellation, build, check_balance
from .radial_fn import ParseError, parse_radial

__version__ = "0.1.0"
