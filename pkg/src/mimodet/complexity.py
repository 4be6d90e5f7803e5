"""Closed-form multiplication counts for the detector building blocks.

"message" variants are the one-hot (order-M) readout/estimation used here;
"symbol" variants are the per-component counterpart over the sqrt(M)-PAM
alphabet, included for comparison. ML is the exhaustive search.
"""

from __future__ import annotations

import math

from .errors import ConfigError


def _sqrt_order(m: int) -> int:
    side = math.isqrt(m)
    if side * side != m:
        raise ConfigError(f"M={m} must be a perfect square for sqrt(M) terms")
    return side


def ml_multiplications(m: int, k: int, n: int) -> int:
    return m ** (k // 2) * (n * k + n)


def readout_message_multiplications(m: int, k: int, s_u: int, r1: int, r2: int) -> int:
    return (2 * s_u * r1 + r1 * r2 + r2 * m) * k // 2


def readout_symbol_multiplications(m: int, k: int, s_u: int, r1: int, r2: int) -> int:
    return (s_u * r1 + r1 * r2 + r2 * _sqrt_order(m)) * k


def estimation_message_multiplications(m: int, k: int) -> int:
    return 3 * m * k


def estimation_symbol_multiplications(m: int, k: int) -> int:
    return 3 * _sqrt_order(m) * k


def complexity_report(
    m: int, k: int, n: int, s_u: int = 8, r1: int = 128, r2: int = 64
) -> dict[str, int]:
    """Multiplication counts; readout/estimation entries are per iteration."""
    return {
        "ml_total": ml_multiplications(m, k, n),
        "readout_message_per_iter": readout_message_multiplications(m, k, s_u, r1, r2),
        "readout_symbol_per_iter": readout_symbol_multiplications(m, k, s_u, r1, r2),
        "estimation_message_per_iter": estimation_message_multiplications(m, k),
        "estimation_symbol_per_iter": estimation_symbol_multiplications(m, k),
    }
