"""Pseudo-spectral micropolar fluid solver with Morrey-Campanato regularity monitoring."""

__version__ = "0.1.0"

from .kernels import BACKEND as KERNEL_BACKEND
from .spectral import (
    Grid,
    ScalarField,
    State,
    VectorField,
    curl,
    divergence,
    grad_div,
    gradient,
    inner_l2,
    laplacian,
    leray_project,
    partial,
    to_real,
    to_spectral,
)


__all__ = [
    "KERNEL_BACKEND",
    "Grid",
    "ScalarField",
    "VectorField",
    "State",
    "to_spectral",
    "to_real",
    "partial",
    "gradient",
    "leray_project",
    "curl",
    "divergence",
    "grad_div",
    "laplacian",
    "inner_l2",
]
