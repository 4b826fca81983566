"""N-body particle heuristic for the Euclidean travelling salesman problem."""

from .instances import CityInstance, gen_grid, gen_random_uniform, load_named, parse_tsplib
from .sim import SimConfig, Variant, run
from .tour import Tour, percent_error, tour_cost

__all__ = [
    "CityInstance",
    "SimConfig",
    "Tour",
    "Variant",
    "gen_grid",
    "gen_random_uniform",
    "load_named",
    "parse_tsplib",
    "percent_error",
    "run",
    "tour_cost",
]
