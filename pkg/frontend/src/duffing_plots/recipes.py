"""Figure recipes: data files describing panels and series per figure."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

from duffing_plots.errors import SchemaError


@dataclass(frozen=True)
class FigureRecipe:
    figure: str
    inputs: tuple[str, ...]
    panels: tuple[dict, ...]

    @property
    def n_panels(self) -> int:
        return len(self.panels)


def available_figures() -> list[str]:
    root = resources.files("duffing_plots") / "recipes"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_recipe(figure: str) -> FigureRecipe:
    path = resources.files("duffing_plots") / "recipes" / f"{figure}.json"
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise SchemaError(
            f"no recipe for figure {figure!r}; available: {available_figures()}"
        ) from None
    return FigureRecipe(
        figure=raw["figure"],
        inputs=tuple(raw["inputs"]),
        panels=tuple(raw["panels"]),
    )
