"""Offline figure rendering for duffing-qdyn CSV outputs.

Figure layouts live as JSON recipe files next to the code; rendering is a
pure read of the CSV inputs (schema-validated) into matplotlib files, with
embedded timestamps suppressed so reruns are byte-stable.
"""

from duffing_plots.recipes import FigureRecipe, load_recipe, available_figures
from duffing_plots.render import render

__version__ = "0.1.0"

__all__ = ["FigureRecipe", "load_recipe", "available_figures", "render", "__version__"]
