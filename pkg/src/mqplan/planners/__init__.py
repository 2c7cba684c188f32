"""Planners sharing the scene, validity cache and roadmap modules."""

from __future__ import annotations

from mqplan.planners.base import (
    Planner,
    PlannerConfig,
    PlanningSession,
    Query,
    Solution,
    StopCondition,
)
from mqplan.planners.eirm import EIRMStar, reverse_effort
from mqplan.planners.lazyprm import EOLazyPRMStar, LazyPRMStar
from mqplan.planners.rrt import RRTConnect
from mqplan.planners.search import search_cost_ordered, search_effort_ordered

PLANNERS = {
    "rrtconnect": RRTConnect,
    "lazyprmstar": LazyPRMStar,
    "eolazyprmstar": EOLazyPRMStar,
    "eirmstar": EIRMStar,
}


def make_planner(name: str, session: PlanningSession) -> Planner:
    try:
        cls = PLANNERS[name]
    except KeyError:
        raise ValueError(f"unknown planner {name!r}; choose from {sorted(PLANNERS)}") from None
    return cls(session)


__all__ = [
    "EIRMStar",
    "EOLazyPRMStar",
    "LazyPRMStar",
    "PLANNERS",
    "Planner",
    "PlannerConfig",
    "PlanningSession",
    "Query",
    "RRTConnect",
    "Solution",
    "StopCondition",
    "make_planner",
    "reverse_effort",
    "search_cost_ordered",
    "search_effort_ordered",
]
