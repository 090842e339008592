"""Second-view construction: LBP maps, channel splits, external pairs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RecipeError, ShapeError

RECIPE_KINDS = ("lbp_plus_gray", "channel_split", "external_pair", "identity_pair")

# Clockwise from the top-left neighbour; bit n weights 2^n.
_LBP_OFFSETS = (
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
)


@dataclass(frozen=True)
class ViewRecipe:
    """How to derive the two views from the raw planes of one manifest line."""

    kind: str
    c1: int = 0
    c2: int = 1

    def __post_init__(self):
        if self.kind not in RECIPE_KINDS:
            raise RecipeError(f"unknown view recipe {self.kind!r} (choose from {RECIPE_KINDS})")
        if self.kind == "channel_split" and (self.c1 < 0 or self.c2 < 0):
            raise RecipeError("channel indices must be non-negative")


def lbp_map(img: np.ndarray) -> np.ndarray:
    """8-neighbour local binary pattern map, same size as the input.

    Radius 1, strict ``neighbour > centre`` comparison, bits ordered clockwise
    from the top-left neighbour, zero padding beyond the borders. Codes are
    scaled by 1/255 so the output lives in [0, 1].
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] < 3 or img.shape[1] < 3:
        raise ShapeError(f"lbp_map needs at least a 3x3 image, got {img.shape}")
    p, q = img.shape
    padded = np.zeros((p + 2, q + 2), dtype=np.float64)
    padded[1:-1, 1:-1] = img
    codes = np.zeros((p, q), dtype=np.float64)
    for bit, (dy, dx) in enumerate(_LBP_OFFSETS):
        neighbour = padded[1 + dy : 1 + dy + p, 1 + dx : 1 + dx + q]
        codes += float(1 << bit) * (neighbour > img)
    return codes / 255.0


def apply_recipe(planes: list[np.ndarray], recipe: ViewRecipe) -> tuple[np.ndarray, np.ndarray]:
    """Turn the raw planes of one sample into its (view1, view2) pair."""
    if not planes:
        raise RecipeError("no input planes")
    if recipe.kind == "lbp_plus_gray":
        if len(planes) != 1:
            raise RecipeError("lbp_plus_gray expects a single gray plane")
        gray = planes[0]
        return gray, lbp_map(gray)
    if recipe.kind == "channel_split":
        if max(recipe.c1, recipe.c2) >= len(planes):
            raise RecipeError(
                f"channel_split({recipe.c1},{recipe.c2}) needs {max(recipe.c1, recipe.c2) + 1} "
                f"channel planes, manifest line has {len(planes)}"
            )
        return planes[recipe.c1], planes[recipe.c2]
    if recipe.kind == "external_pair":
        if len(planes) < 2:
            raise RecipeError("external_pair expects two planes per manifest line")
        return planes[0], planes[1]
    # identity_pair: duplicate view1 (debug mode)
    if len(planes) != 1:
        raise RecipeError("identity_pair expects a single plane")
    return planes[0], planes[0]
