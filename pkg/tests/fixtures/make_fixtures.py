"""Regenerate the committed synthetic CSV fixtures.

Run from the repository root:  python3 tests/fixtures/make_fixtures.py
The golden JSON is refreshed by the companion command printed at the end.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

HERE = Path(__file__).parent


def write_staggered_example() -> None:
    rng = np.random.default_rng(987654321)
    n_co, t_len = 9, 8
    cohorts = {4: 2, 6: 1}  # adoption column -> number of adopters
    n = n_co + sum(cohorts.values())
    levels = rng.normal(10.0, 3.0, size=(n, 1))
    common = np.cumsum(rng.normal(0.4, 0.5, size=t_len))
    x = rng.normal(5.0, 1.0, size=(n, t_len))
    noise = rng.normal(0.0, 0.8, size=(n, t_len))
    W = np.zeros((n, t_len), dtype=bool)
    row = n_co
    for a_col in sorted(cohorts):
        for _ in range(cohorts[a_col]):
            W[row, a_col:] = True
            row += 1
    Y = levels + common + 0.9 * x + noise + 3.0 * W
    with open(HERE / "staggered_example.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["unit", "year", "outcome", "adopted", "xvar"])
        for i in range(n):
            for t in range(t_len):
                writer.writerow(
                    [
                        f"unit{i:02d}",
                        2000 + t,
                        f"{Y[i, t]:.10f}",
                        int(W[i, t]),
                        f"{x[i, t]:.10f}",
                    ]
                )


if __name__ == "__main__":
    write_staggered_example()
    print("wrote", HERE / "staggered_example.csv")
    print(
        "refresh the golden with:\n"
        "  python3 -m sdid.cli tests/fixtures/staggered_example.csv outcome unit year adopted "
        "--vce placebo --seed 97 --reps 20 --covariates xvar --covariate-type projected "
        "--mattitles > tests/fixtures/golden_staggered.json"
    )
