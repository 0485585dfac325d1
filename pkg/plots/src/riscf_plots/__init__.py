from .render import FIGURES, PlotSpec, SchemaError, render

__all__ = ["FIGURES", "PlotSpec", "SchemaError", "render"]
