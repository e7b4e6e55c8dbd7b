"""Shared panel builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from sdid import BalancedPanel, panel_from_matrices
from sdid.weights import SolverConfig

FIXTURE_DIR = __import__("pathlib").Path(__file__).parent / "fixtures"

# tight settings for tests that compare against high-precision oracles
TIGHT = SolverConfig(max_iterations=200_000, relative_decrease_tolerance=1e-12)


def make_block_panel(
    rng: np.random.Generator,
    n_co: int,
    n_tr: int,
    t_len: int,
    a_col: int,
    effect: float = 0.0,
    scale: float = 1.0,
    trend: float = 0.0,
) -> BalancedPanel:
    """Random block-design panel: unit levels, common trend, noise, and a
    constant post-adoption effect on treated units."""
    n = n_co + n_tr
    levels = rng.normal(size=(n, 1)) * 2.0
    common = trend * np.arange(t_len) + rng.normal(size=t_len)
    Y = levels + common + rng.normal(size=(n, t_len)) * scale
    W = np.zeros((n, t_len), dtype=bool)
    W[n_co:, a_col:] = True
    Y = Y + effect * W
    return panel_from_matrices(Y, W, times=range(1, t_len + 1))


def make_staggered_panel(
    rng: np.random.Generator,
    n_co: int,
    cohorts: dict[int, int],
    t_len: int,
    effect: float = 0.0,
    scale: float = 1.0,
) -> BalancedPanel:
    """Random staggered panel; ``cohorts`` maps adoption column -> size."""
    n_tr = sum(cohorts.values())
    n = n_co + n_tr
    levels = rng.normal(size=(n, 1)) * 2.0
    common = rng.normal(size=t_len)
    Y = levels + common + rng.normal(size=(n, t_len)) * scale
    W = np.zeros((n, t_len), dtype=bool)
    row = n_co
    for a_col in sorted(cohorts):
        for _ in range(cohorts[a_col]):
            W[row, a_col:] = True
            row += 1
    Y = Y + effect * W
    return panel_from_matrices(Y, W, times=range(1, t_len + 1))


def quota_like_panel(
    seed: int = 7,
    n: int = 115,
    n_tr: int = 9,
    first_year: int = 1990,
    last_year: int = 2015,
    with_covariate: bool = True,
    effect: float = 8.0,
) -> BalancedPanel:
    """Panel shaped like a country-by-year staggered adoption study:
    115 units over 26 years, 9 adopters spread over 7 adoption years."""
    rng = np.random.default_rng(seed)
    t_len = last_year - first_year + 1
    years = np.arange(first_year, last_year + 1)
    adoption_years = [2000, 2002, 2002, 2003, 2005, 2005, 2008, 2010, 2013][:n_tr]
    n_co = n - n_tr
    levels = rng.normal(15.0, 6.0, size=(n, 1))
    trend = 0.25 * (years - first_year) + np.cumsum(rng.normal(0, 0.3, size=t_len))
    noise = rng.normal(0, 1.5, size=(n, t_len))
    Y = levels + trend + noise
    W = np.zeros((n, t_len), dtype=bool)
    for j, year in enumerate(adoption_years):
        W[n_co + j, list(years).index(year):] = True
    Y = Y + effect * W
    X = None
    names = ()
    if with_covariate:
        x = rng.normal(9.0, 1.0, size=(n, t_len)) + 0.02 * (years - first_year)
        Y = Y + 1.5 * x
        X = x[:, :, None]
        names = ("lngdp",)
    return panel_from_matrices(Y, W, times=years, X=X, covariate_names=names)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240811)
