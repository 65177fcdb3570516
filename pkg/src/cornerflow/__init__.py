"""2D irrotational flow around bodies with corners.

Exact and panel-method incompressible potentials with circulation,
corner-singularity analysis, Blasius/Kutta-Joukowsky forces, and a
subsonic compressible stream-function solver with refinement studies.
"""

from .analysis import (CensusResult, CornerReport, LaurentFit, circulation,
                       corner_census, farfield_fit, fit_corner, mass_flux,
                       potential_increment, sign_attainment,
                       sign_component_census)
from .compressible import (CompressibleSolution, ConformalGrid,
                           RefinementStudy, SolverOptions, build_grid,
                           refinement_study, solve_subsonic)
from .forces import ForceResult, blasius_force, kutta_joukowsky_lift
from .gas import BernoulliState, FluxInversion, GasModel
from .geometry import (Body, Circle, CircleContour, Corner, FlatPlate,
                       Polygon, PolylineContour, classify_corners, probe_ring)
from .incompressible import (CircleFlow, FarField, JoukowskyPlateMap,
                             KuttaResult, PanelFlow, PanelSolution, PlateFlow,
                             kutta_solve, panel_solve)

__version__ = "0.1.0"

__all__ = [
    "BernoulliState", "Body", "CensusResult", "Circle", "CircleContour",
    "CircleFlow", "CompressibleSolution", "ConformalGrid", "Corner",
    "CornerReport", "FarField", "FlatPlate", "FluxInversion", "ForceResult",
    "GasModel", "JoukowskyPlateMap", "KuttaResult", "LaurentFit", "PanelFlow",
    "PanelSolution", "PlateFlow", "Polygon", "PolylineContour",
    "RefinementStudy", "SolverOptions", "blasius_force", "build_grid",
    "circulation", "classify_corners", "corner_census", "farfield_fit",
    "fit_corner", "kutta_joukowsky_lift", "kutta_solve", "mass_flux",
    "panel_solve", "potential_increment", "probe_ring", "refinement_study",
    "sign_attainment", "sign_component_census", "solve_subsonic",
]
