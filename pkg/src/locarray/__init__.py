"""Covering arrays and (d, t, lambda)-locating arrays built in two stages."""

from .arrayfile import ArrayFormatError, read_array, write_array
from .covering import CoverageReport, LllConfig, LllFailure, generate, generate_ipo, generate_lll, verify_ca
from .ga import GaParams, evolve, fitness, search_rows
from .kernels import BACKEND
from .locate import (LaVerdict, NonLocEntry, RowMap, brute_force_nonlocating, build_rowmap, compute_rho,
                     compute_rho_dset, find_nonlocating, symmetric_difference_size, verify_la)
from .model import (DSet, DSetMode, Interaction, LocatingWarning, Params, ParamsError, TestArray, count_dsets,
                    count_pairs, enumerate_dsets, enumerate_interactions)
from .pipeline import VerificationFailed, build_locating_array
from .timing import BudgetExceeded, Deadline

__version__ = "0.1.0"
