"""Nonlocal obstacle problems with drift: exponents, solves and scenario runs."""

from pathlib import Path

from ._core import (
    ConfigError,
    InvalidInput,
    __version__,
    chi,
    gamma_exponent,
    half_laplacian_power_oracle,
    normalization_constant,
    power_image_coefficient,
    power_multiplier,
    run_config,
    solve_bump,
    solve_exponent_root,
    tilde_gamma,
)


def run_config_file(path, out="", workers=1):
    """Run the scenario described by a config file."""
    return run_config(Path(path).read_text(), str(out) if out else "", workers)


__all__ = [
    "ConfigError",
    "InvalidInput",
    "__version__",
    "chi",
    "gamma_exponent",
    "half_laplacian_power_oracle",
    "normalization_constant",
    "power_image_coefficient",
    "power_multiplier",
    "run_config",
    "run_config_file",
    "solve_bump",
    "solve_exponent_root",
    "tilde_gamma",
]
