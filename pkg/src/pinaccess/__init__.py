"""Standard-cell pin-access verification.

Builds small abutment testcells from a cell library, routes them on two
metal layers under deliberately hostile constraints and reports the rule
violations each library cell is responsible for.
"""

from .geometry import Rect
from .techlib import CellMaster, LayerRule, LibraryError, Pin, TechRules, parse_library, profile_library, scale_rules
from .testgen import TestcellSpec, assign_connectivity, count_instances, enumerate_testcells
from .router import RouteConfig, build_grid, extract_connectivity, plan_straps, route
from .drc import DrcViolation, attribute, check_drc
from .pipeline import RunConfig, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "Rect", "CellMaster", "LayerRule", "LibraryError", "Pin", "TechRules", "parse_library",
    "profile_library", "scale_rules", "TestcellSpec", "assign_connectivity", "count_instances",
    "enumerate_testcells", "RouteConfig", "build_grid", "extract_connectivity", "plan_straps", "route",
    "DrcViolation", "attribute", "check_drc", "RunConfig", "run_pipeline",
]
