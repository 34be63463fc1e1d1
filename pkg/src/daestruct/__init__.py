"""Structural index analysis for circuits with refined field devices."""

from .elements import DescriptorElement, classify
from .errors import DaeStructError
from .linalg import pencil_index
from .mna import assemble, index_bound
from .topology import Branch, CircuitGraph, build_incidence

__version__ = "0.1.0"

__all__ = ["Branch", "CircuitGraph", "DaeStructError", "DescriptorElement", "assemble",
           "build_incidence", "classify", "index_bound", "pencil_index"]
