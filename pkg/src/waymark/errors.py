"""Exception types raised across the waymark package."""

from __future__ import annotations


class WaymarkError(Exception):
    """Base class for every error raised by waymark."""


class DegenerateEdge(WaymarkError, ValueError):
    """Two consecutive path points coincide, so the edge has no direction."""


class Infeasible(WaymarkError):
    """No subset of the candidate intervals covers the edge twice."""

    def __init__(self, uncovered_at: float):
        self.uncovered_at = uncovered_at
        super().__init__(f"edge cannot be double-covered near x={uncovered_at:.6g}")


class TooLarge(WaymarkError):
    """Exhaustive search refused because the instance is too big."""


class UnknownSite(WaymarkError, KeyError):
    """A site id was referenced that the problem or instance does not know."""

    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return str(self.args[0]) if self.args else "unknown site"


class EdgeInfeasible(WaymarkError):
    """A path edge cannot be double-covered by the available sites.

    ``edge_index`` is 1-based, ``uncovered_at`` is the edge-local abscissa and
    ``world_point`` the same location in world coordinates.
    """

    def __init__(self, edge_index: int, uncovered_at: float, world_point: tuple[float, float]):
        self.edge_index = edge_index
        self.uncovered_at = uncovered_at
        self.world_point = world_point
        super().__init__(
            f"edge {edge_index} infeasible: uncovered near "
            f"({world_point[0]:.4f}, {world_point[1]:.4f})"
        )


class AllSitesFiltered(WaymarkError):
    """The clearance filter removed every candidate site."""


class SingularInformation(WaymarkError):
    """An information matrix could not be inverted."""


class NonconvergentFilter(WaymarkError):
    """The filter lost positive definiteness during a simulation."""

    def __init__(self, step: int, reason: str = "information matrix not positive definite"):
        self.step = step
        super().__init__(f"filter diverged at step {step}: {reason}")
