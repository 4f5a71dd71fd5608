"""Learned sorting with a small regression network, plus baselines, dataset
generation, a cost model and a benchmark CLI."""

from .analysis import CostParams, break_even_n, coeffs_general, t_best, t_general, t_worst
from .baselines import heapsort, mergesort, quicksort, single_pass_learned_sort
from .core import (DEFAULT_THETA, ConfigError, InvalidKeyError, IterationMetrics, OpCounters,
                   SortConfig, normalize, validate_keys)
from .model import (Constant, MlpModel, OracleRank, RandomPredictor, TrainConfig, forward,
                    huber_grad, huber_loss, load_model, save_model, train)
from .polish import CompactedRun, SparseRun, compact, merge, merge_one
from .sorter import RunSet, map_iteration, nn_sort, phase_breakdown, position

__version__ = "0.1.0"
