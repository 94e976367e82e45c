"""Conditioned Galton-Watson forests, their codings and stable Levy forests."""

from .coding import (
    ContourFn,
    LatticePath,
    contour_from_height,
    cyclic_shift,
    first_passage_index,
    forest_from_walk,
    height_from_walk,
    height_of_shift_check,
    tree_distance,
    walk_from_forest,
)
from .conditioned import (
    ConditionedForestSpec,
    sample_conditioned_forest,
    sample_first_passage_bridge_walk,
    walk_hitting_pmf,
)
from .errors import (
    CondForestError,
    HorizonError,
    InfeasibleSpecError,
    NoCrossingError,
    ParseError,
    SizeCapExceeded,
    ValidationError,
)
from .laws import OffspringLaw, parse_law
from .trees import (
    Forest,
    UlamHarrisTree,
    sample_gw_forest,
    sample_gw_tree,
    subtree_at,
    vertex_table,
)

__version__ = "0.1.0"
