"""Finite ultrametric spaces, symbolic Cantor sets and quasimobius distortion."""

from .cantor import CantorSpace, ExactDistance, Word, materialize, rho, sigma
from .deform import chordal_extend, find_sphericalization_counterexample, invert, sphericalize
from .distort import PointMap, bilipschitz_of_map, distortion_report, is_mobius, weak_qm_constant, weak_qs_constant
from .embed import embed_compact, embed_unbounded, uniformize
from .errors import UMTError
from .metric import ExtendedSpace, FiniteMetricSpace, QuasiMetricSpace, cross_ratio, make_space
from .props import analyze, check_ultrametric
from .ultrametrize import build_dendrogram, subdominant_ultrametric, ultrametrization_distortion

__version__ = "0.1.0"
