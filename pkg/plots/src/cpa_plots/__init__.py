"""Offline figure generation for aging-contact-process CSV outputs."""

from .figures import (RENDERERS, render_macro, render_mu, render_shape,
                      render_spacetime, render_tail)
from .schemas import SchemaError

__version__ = "0.1.0"
__all__ = ["RENDERERS", "SchemaError", "render_macro", "render_mu",
           "render_shape", "render_spacetime", "render_tail"]
