"""Ablation and baseline algorithms as configuration-selected strategies.

Every variant shares the same model engine and update machinery; a variant
only picks the critic target rule, the actor's head-aggregation rule, the
reward rule, and structural switches (network size class, twin critics,
entropy). The numpy aggregation functions here are the diagnostic/oracle
surface; the graph-building twins live in `policy.aggregate_heads_node`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import mopo_uncertainty  # noqa: F401  (public here per module map)
from .errors import ConfigError
from .policy import conservative_q, _bottom_mean


@dataclass(frozen=True)
class VariantSpec:
    name: str
    big_critic: bool          # 3-layer trunk class vs the plain 2-layer one
    multi_head: bool          # combinations define K; False forces M = n_elite (K = 1)
    target_rule: str          # "per_model" | "shared_mean"
    aggregation: str          # "bottom_k" | "mean" | "penalty" | "min_all" | "redq"
    twin_critic: bool = True
    entropy: bool = True
    reward_penalty: bool = False
    force_drop_zero: bool = False


VARIANTS = {
    "cmbac": VariantSpec("cmbac", True, True, "per_model", "bottom_k"),
    "mbpo": VariantSpec("mbpo", False, False, "per_model", "bottom_k", force_drop_zero=True),
    "b_mbpo": VariantSpec("b_mbpo", True, False, "per_model", "bottom_k", force_drop_zero=True),
    "b_lmeq": VariantSpec("b_lmeq", True, True, "per_model", "mean", force_drop_zero=True),
    "mbpoeq": VariantSpec("mbpoeq", True, True, "shared_mean", "mean", force_drop_zero=True),
    "cmbacup": VariantSpec("cmbacup", True, True, "per_model", "penalty"),
    "mincmbac": VariantSpec("mincmbac", True, True, "per_model", "min_all"),
    "redq_cmbac": VariantSpec("redq_cmbac", True, True, "per_model", "redq"),
    "mopo_online": VariantSpec(
        "mopo_online", True, False, "per_model", "bottom_k", reward_penalty=True, force_drop_zero=True
    ),
    "scmbac": VariantSpec("scmbac", True, True, "per_model", "bottom_k", twin_critic=False, entropy=False),
}


def get_variant(name):
    key = name.lower().replace("-", "_")
    if key not in VARIANTS:
        raise ConfigError(f"unknown variant {name!r}; choose from {sorted(VARIANTS)}")
    return VARIANTS[key]


# ---------------------------------------------------------------------------
# aggregation rules (numpy surface)


def cmbacup_q(head_values_1, head_values_2, penalty):
    """Mean minus penalty * population std per network, then the two-network min."""
    agg1 = _mean_minus_std(head_values_1, penalty)
    if head_values_2 is None:
        return agg1
    return np.minimum(agg1, _mean_minus_std(head_values_2, penalty))


def _mean_minus_std(values, penalty):
    values = np.asarray(values, dtype=np.float64)
    return values.mean(axis=-1) - penalty * values.std(axis=-1)


def mincmbac_q(head_values_1, head_values_2):
    """Minimum over every head of both networks."""
    m1 = np.asarray(head_values_1, dtype=np.float64).min(axis=-1)
    if head_values_2 is None:
        return m1
    return np.minimum(m1, np.asarray(head_values_2, dtype=np.float64).min(axis=-1))


def redq_cmbac_q(cons1, cons2):
    """Average of the two per-network conservative estimates."""
    return (np.asarray(cons1, dtype=np.float64) + np.asarray(cons2, dtype=np.float64)) / 2.0


def aggregate_np(head_values_1, head_values_2, rule, drop, penalty):
    """Numpy aggregation used for diagnostics and value estimates."""
    if rule == "bottom_k":
        return conservative_q(head_values_1, head_values_2, drop)
    if rule == "mean":
        return conservative_q(head_values_1, head_values_2, 0)
    if rule == "penalty":
        return cmbacup_q(head_values_1, head_values_2, penalty)
    if rule == "min_all":
        return mincmbac_q(head_values_1, head_values_2)
    if rule == "redq":
        c1 = _bottom_mean(head_values_1, drop)
        if head_values_2 is None:
            return c1
        return redq_cmbac_q(c1, _bottom_mean(head_values_2, drop))
    raise ConfigError(f"unknown aggregation rule {rule!r}")


# ---------------------------------------------------------------------------
# reward rules


def penalized_reward(r, u, coeff):
    """Uncertainty-penalized reward r - coeff * u."""
    return r - coeff * u
