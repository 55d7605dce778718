"""Elliptic spin Ruijsenaars operators, their classical equilibria and frozen spin chains."""

__version__ = "0.1.0"
