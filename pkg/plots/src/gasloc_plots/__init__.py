"""Offline figures from gasloc result logs and posterior dumps."""

from .figures import FigureSpec, render

__all__ = ["FigureSpec", "render"]
