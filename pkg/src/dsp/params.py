"""
Parameter counting and memory footprint for dense stacks and model tiers.
"""
from typing import Sequence

from src.config.constants import BYTES_PER_PARAMETER, MODEL_TIERS
from src.utils.errors import InvalidInput


def count_parameters(layers: Sequence[int]) -> int:
    """
    Weights plus biases of consecutive dense layers.

    Args:
        layers: Layer widths, input first

    Returns:
        sum over consecutive pairs of (n_in + 1) * n_out
    """
    if not layers:
        raise InvalidInput("count_parameters needs at least one layer size")
    if any(int(n) < 1 for n in layers):
        raise InvalidInput("Layer sizes must be >= 1")
    return sum((int(n_in) + 1) * int(n_out) for n_in, n_out in zip(layers[:-1], layers[1:]))


def parameter_bytes(count: int, bytes_per_param: int = BYTES_PER_PARAMETER) -> int:
    if count < 0 or bytes_per_param < 1:
        raise InvalidInput("count must be >= 0 and bytes_per_param >= 1")
    return count * bytes_per_param


def format_bytes(n: int) -> str:
    """Binary-prefixed size with two decimals: 791.27 KB, 5.88 MB."""
    if n < 1024:
        return f"{n} B"
    if n < 1024 ** 2:
        return f"{n / 1024:.2f} KB"
    return f"{n / 1024 ** 2:.2f} MB"


def tier_footprint(name: str) -> dict:
    if name not in MODEL_TIERS:
        raise InvalidInput(f"Unknown model tier {name!r}")
    t_a, count = MODEL_TIERS[name]
    size = parameter_bytes(count)
    return {"tier": name, "t_a_s": t_a, "parameters": count, "bytes": size, "size": format_bytes(size)}
