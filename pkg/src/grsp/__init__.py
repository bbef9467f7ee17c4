"""Link-based node similarity under generalized random surfer-pair models."""

__version__ = "0.1.0"

from .errors import (CapacityError, ContractError, GraphFormatError, GrspError,
                     InsufficientNodesError, SpecError)
from .graph import Graph, LabelMap, load_edge_list, load_labels
from .kernels import (BUILTIN_MEASURES, STOPPED, Convex, Kernel, MeasureSpec, PRank,
                      Product, PSimRank, PSimRankStar, RvsSimRank, SimRank, SimRankStar,
                      TransitionDistribution, make_kernel, parse_measure)
from .montecarlo import Estimate, McConfig, WalkOutcome, estimate, estimate_many, sample_walk
from .query import QueryResult, topk
from .solver import SimilarityTable, SolveConfig, residual, solve
from .evaluation import EvalConfig, EvalReport, PRankSweep, average_precision, eval_map
