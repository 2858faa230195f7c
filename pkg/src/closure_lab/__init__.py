"""Closure lab: jets, Möbius groups, renormalization, grading, measures and rigidity checks."""

from .errors import (ChartInversionError, ClosureLabError, EscapeError, NonMonotoneError, NotConverged,
                     NotCrossed, NumericalFailure, StarvationError, TowerBlowup, ValidationError)
from .jets import Jet, NormSpec, VFJet, cnorm, compose, difference_field, invert, lie_bracket, \
    norm_equivalence_constant
from .groups import (Contraction, Mobius, SphereMetric, SpherePoint, Word, ghys_tower, local_model,
                     orbit_accumulation, pseudo_solvable_verdict, rotation)
from .closure import RenormSchedule, closure_field, euler_flow, iterate, iterate_flow_compare, renormalize
from .grading import decompose, grading_check, ladder, leading_limit
from .measures import EmpiricalMeasure, haar_discrepancy, local_dimension, quasi_volume_constant, rectifying_map
from .rigidity import Conjugacy, recover_mobius, synchronized_pair

__version__ = "0.1.0"
