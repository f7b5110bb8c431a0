"""Normal and abnormal extremals of Lagrangians constrained to a distribution."""
from .errors import *  # noqa: F401,F403
from .geometry import ChartProblem, DiscreteCurve, DistributionFrame, Submanifold
from .problems import builtin

__version__ = "0.1.0"
