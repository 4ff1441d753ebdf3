"""Tabulated required-Z curves for reporting.

Each builder returns ``(header, rows)`` ready for CSV emission or rendering.
Default grids: budget slices dm in 1..100, repetition rates u in 0.01..1.00
(step 0.01), and three alpha lines (0.10, 0.05, 0.01).
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError
from .stats_core import (
    always_valid_curve,
    required_z_by_rate,
    required_z_uniform,
    rho_for_min_at,
    sample_size_ratio,
    z_from_p_two_sided,
)

__all__ = [
    "DEFAULT_ALPHAS",
    "curve_z_by_dm",
    "curve_z_and_size_ratio",
    "curve_z_by_rate",
    "curve_always_valid_comparison",
]

DEFAULT_ALPHAS = (0.10, 0.05, 0.01)


def _alpha_columns(alphas) -> list[str]:
    return [f"z_alpha_{a:g}" for a in alphas]


def curve_z_by_dm(alphas=DEFAULT_ALPHAS, dm_max: int = 100):
    """Required Z against the number of uniform budget slices d*m."""
    if dm_max < 1:
        raise DomainError(f"dm_max must be >= 1, got {dm_max}")
    header = ["dm"] + _alpha_columns(alphas)
    rows = [
        [dm] + [required_z_uniform(a, dm) for a in alphas] for dm in range(1, dm_max + 1)
    ]
    return header, rows


def curve_z_and_size_ratio(ref_p: float = 0.05, p_grid=None):
    """Required Z and relative test length for a range of required p-values.

    The size ratio compares each p-value's Z to the reference p-value's Z,
    so the ref_p row is exactly 1.
    """
    if p_grid is None:
        p_grid = [round(0.0005 * j, 6) for j in range(1, 101)]
    z_ref = z_from_p_two_sided(ref_p)
    header = ["p", "z", "size_ratio"]
    rows = []
    for p in p_grid:
        z = z_from_p_two_sided(p)
        rows.append([p, z, sample_size_ratio(z_ref, z)])
    return header, rows


def curve_z_by_rate(alphas=DEFAULT_ALPHAS):
    """Required Z against the repetition rate u (per-point threshold u*alpha)."""
    header = ["u"] + _alpha_columns(alphas)
    rows = [
        [u] + [required_z_by_rate(a, u) for a in alphas]
        for u in (round(j / 100, 2) for j in range(1, 101))
    ]
    return header, rows


def curve_always_valid_comparison(
    alpha: float = 0.05,
    u: float = 0.05,
    t_max: int = 20_000_000,
    rho: float | None = None,
    num: int = 512,
):
    """Always-valid required Z versus the flat repeated-significance score.

    When rho is omitted it is grid-searched so the comparator's minimum falls
    near t_max. Returns the chosen rho alongside the table.
    """
    if t_max < 1:
        raise DomainError(f"t_max must be >= 1, got {t_max}")
    if rho is None:
        rho = rho_for_min_at(alpha, t_max)
    ts = np.unique(np.geomspace(1, t_max, num=num).astype(np.int64))
    av = always_valid_curve(rho, alpha, ts)
    z_rep = required_z_by_rate(alpha, u)
    header = ["t", "z_always_valid", "z_repetition"]
    rows = [[int(t), float(z), z_rep] for t, z in zip(ts, av)]
    return header, rows, rho
