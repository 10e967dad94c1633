"""Minimum landmark placement for bearing-only vehicle localization."""

__version__ = "0.1.0"

from .cover import CoverProblem, CoverSolution, brute_force_two_cover, greedy_two_cover, verify_two_cover
from .errors import (
    AllSitesFiltered,
    DegenerateEdge,
    EdgeInfeasible,
    Infeasible,
    NonconvergentFilter,
    SingularInformation,
    TooLarge,
    UnknownSite,
    WaymarkError,
)
from .geometry import (
    CameraSpec,
    CandidateSite,
    CoverInterval,
    EdgeFrame,
    PathPlan,
    Point2,
    edge_frame,
    filter_sites_by_clearance,
    in_region_of_influence,
    is_visible,
    point_segment_distance,
    to_edge_frame,
    visibility_interval,
    visibility_interval_circular,
)
from .planner import Placement, plan_placement, verify_placement
from .simulator import RobotState, SimConfig, SimTrace, simulate, three_sigma_report
