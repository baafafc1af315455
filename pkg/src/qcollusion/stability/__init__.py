"""Exhaustive stochastic-stability verification on small discretized instances."""

from .auction import valid_interval, valid_perturbations_auction, valid_perturbations_scan
from .graph import arborescence_costs, min_arborescence, min_costs_between, recurrent_classes
from .grid import BudgetExceeded, GridAlignmentError, GridSpec, StateSpace, snap
from .order import (AbsorbingSummary, check_lemma6, check_order, g_candidates, order_compare,
                    order_matrix, summarize)
from .report import Instance, StabilityReport, check_lemma3, shipped_instances, verify

__all__ = [
    "valid_interval", "valid_perturbations_auction", "valid_perturbations_scan",
    "arborescence_costs", "min_arborescence", "min_costs_between", "recurrent_classes",
    "BudgetExceeded", "GridAlignmentError", "GridSpec", "StateSpace", "snap",
    "AbsorbingSummary", "check_lemma6", "check_order", "g_candidates", "order_compare",
    "order_matrix", "summarize", "Instance", "StabilityReport", "check_lemma3",
    "shipped_instances", "verify",
]
