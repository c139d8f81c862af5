"""Generators for the benchmark densities (axis-aligned squares)."""

from __future__ import annotations

import numpy as np

from .grid import DensityField, GridSpec

__all__ = ["square_density", "squares_density", "square_mask"]


def square_mask(grid: GridSpec, center, width: float) -> np.ndarray:
    """Boolean mask of cells whose centers lie in the closed square."""
    if grid.ndim != 2:
        raise ValueError("square generators expect a 2-D grid")
    cx, cy = (float(c) for c in center)
    half = float(width) / 2.0
    x = grid.cell_centers(0)
    y = grid.cell_centers(1)
    in_x = np.abs(x - cx) <= half + 1e-12
    in_y = np.abs(y - cy) <= half + 1e-12
    return in_x[:, None] & in_y[None, :]


def square_density(grid: GridSpec, center, width: float) -> DensityField:
    """Uniform probability on the cells covered by one square."""
    mask = square_mask(grid, center, width)
    count = int(mask.sum())
    if count == 0:
        raise ValueError(
            f"square at {tuple(center)} with width {width} covers no cell centers"
        )
    values = np.where(mask, 1.0 / count, 0.0)
    return DensityField(grid, values)


def squares_density(grid: GridSpec, squares) -> DensityField:
    """Uniform-height probability on a union of squares.

    ``squares`` is an iterable of ``(center, width)`` pairs; mass splits
    proportionally to the number of covered cells (equal-size squares share
    it evenly).
    """
    mask = np.zeros(grid.shape, dtype=bool)
    for center, width in squares:
        mask |= square_mask(grid, center, width)
    count = int(mask.sum())
    if count == 0:
        raise ValueError("no square covers any cell center")
    return DensityField(grid, np.where(mask, 1.0 / count, 0.0))
