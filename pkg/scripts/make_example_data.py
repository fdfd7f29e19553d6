"""Regenerate the bundled example table (9 variables, 20 years).

Layout: three decreasing linear series (cols 3, 4, 6), three increasing
linear series (cols 5, 7, 8), a decelerating and an accelerating decrease
(cols 1, 9) and a weakly increasing, noisy series (col 2).  Column 4 has one
interior gap.

    python scripts/make_example_data.py > src/trendclass/data/example.csv
"""
import sys

import numpy as np

SEED = 2007
YEARS = np.arange(2000, 2020)

COLUMNS = [
    # name, shape on s in [0, 1], level, scale, noise sd
    ("capelin", lambda s: 2 * (1 - s) ** 2 - 1, 400.0, 150.0, 12.0),
    ("herring", lambda s: 0.45 * (2 * s - 1), 50.0, 10.0, 6.5),
    ("cod", lambda s: 1 - 2 * s, 900.0, 200.0, 60.0),
    ("haddock", lambda s: 1 - 2 * s, 120.0, 30.0, 7.0),
    ("krill", lambda s: 2 * s - 1, 35.0, 8.0, 1.8),
    ("zooplankton", lambda s: 1 - 2 * s, 8.0, 1.5, 0.25),
    ("temperature", lambda s: 2 * s - 1, 4.5, 0.6, 0.15),
    ("salinity", lambda s: 2 * s - 1, 35.0, 0.05, 0.008),
    ("ice_cover", lambda s: 1 - 2 * s ** 2, 60.0, 20.0, 2.5),
]


def generate(seed: int = SEED) -> str:
    rng = np.random.default_rng(seed)
    s = np.linspace(0.0, 1.0, len(YEARS))
    cols = []
    for name, shape, level, scale, noise in COLUMNS:
        cols.append(level + scale * shape(s) + rng.normal(0.0, noise, len(s)))
    lines = ["year," + ",".join(c[0] for c in COLUMNS)]
    for i, year in enumerate(YEARS):
        cells = []
        for j, c in enumerate(cols):
            cells.append("NA" if (j == 3 and i == 7) else f"{c[i]:.4g}")
        lines.append(f"{year}," + ",".join(cells))
    return "\n".join(lines) + "\n"


if __name__ == "__main__":
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else SEED
    sys.stdout.write(generate(seed))
