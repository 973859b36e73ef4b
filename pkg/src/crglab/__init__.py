"""Laboratory for two-party common randomness and secret key generation protocols."""

from .engine import ALICE, BOB, ProtocolSpec, Round, RunRecord, Transcript, run_protocol, validate
from .errors import BudgetExceeded, CapExceeded, ProtocolError
from .permcore import Permutation, chase, invert, random_permutation
from .protocols import hash_equality_augment, meet_in_middle_pv, optimal_distinguisher, pointer_chasing_skg
from .sources import enumerate_source, sample_family
from .table import DistTable

__version__ = "0.1.0"
