"""Poincare series of Flensted-Jensen eigenfunctions on anti-de Sitter quotients."""

__version__ = "0.1.0"
