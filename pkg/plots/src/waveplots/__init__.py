"""Figure rendering for wavetrefftz experiment output."""

from .render import FigureSpec, RenderError, render

__all__ = ["FigureSpec", "RenderError", "render"]
