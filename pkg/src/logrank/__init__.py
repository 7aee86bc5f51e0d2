"""Deterministic protocols for bounded integral matrices of low rank."""

from .matrix import (IntegralMatrix, Rectangle, RankCertificate, deduplicate, distinct_bound_check,
                     exact_rank, load_matrix, mono_stats, rank_of)
from .gamma2 import (BalancedFactorization, BudgetMiss, balanced_factorization, factorize_bounded,
                     pad_to_equal_norm, verify_factorization)
from .finder import (CandidateRectangle, ColorPartition, SamplerConfig, choose_k, color_prob,
                     color_weights_log, extract_mono, find_almost_mono, sample_rectangle, score,
                     select_target_color, sheppard_h)
from .protocol import ProtocolTree, build_protocol, rank_reduce_case, run, verify_all
from .extension import (PolytopePair, ksp_instance, lift, nnmf_from_protocol, slack_matrix,
                        xc_report)

__version__ = "0.1.0"
