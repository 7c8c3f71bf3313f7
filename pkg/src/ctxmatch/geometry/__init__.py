"""Planar computational geometry: triangulation, hulls, boundaries, predicates."""

from .boundary import (
    BOUNDARY_MODES,
    BoundarySet,
    alpha_boundary,
    build_dtm_boundary,
    convex_hull,
    triangle_circumradii,
)
from .delaunay import Triangulation, adjacency, delaunay, locate_triangle
from .predicates import incircle, orient2d, point_in_triangle

__all__ = [
    "BOUNDARY_MODES",
    "BoundarySet",
    "Triangulation",
    "adjacency",
    "alpha_boundary",
    "build_dtm_boundary",
    "convex_hull",
    "delaunay",
    "incircle",
    "locate_triangle",
    "orient2d",
    "point_in_triangle",
    "triangle_circumradii",
]
