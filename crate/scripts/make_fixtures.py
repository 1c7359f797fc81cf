"""Regenerates the small benchmark fixtures in crates/core/tests/fixtures."""
import csv
import pathlib

import numpy as np

OUT = pathlib.Path(__file__).resolve().parent.parent / "crates/core/tests/fixtures"


def write(name, normals, outliers):
    x = np.vstack([normals, outliers])
    y = np.r_[np.zeros(len(normals), int), np.ones(len(outliers), int)]
    with open(OUT / f"{name}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"f{j}" for j in range(x.shape[1])] + ["label"])
        for row, label in zip(x, y):
            w.writerow([repr(float(v)) for v in row] + [label])


def main():
    rng = np.random.default_rng(20240601)

    # Mild shift along every axis of a 20-d Gaussian.
    write("gauss_shift", rng.normal(0, 1, (600, 20)), rng.normal(0.5, 1, (300, 20)))

    # Two correlated normal cultivars and a third, offset one as outliers.
    mix = rng.normal(0, 1, (13, 13)) * 0.3 + np.eye(13)
    a = rng.normal(0, 1, (70, 13)) @ mix + 1.0
    b = rng.normal(0, 1, (70, 13)) @ mix - 1.0
    c = rng.normal(0, 1, (40, 13)) @ mix + np.r_[np.full(6, 1.2), np.full(7, -0.8)]
    write("wine_like", np.vstack([a, b]), c)

    # Normals near a 2-d plane in 8-d space, outliers slightly off the plane.
    basis = np.linalg.qr(rng.normal(0, 1, (8, 8)))[0]
    inside = rng.normal(0, 2, (500, 2)) @ basis[:, :2].T + rng.normal(0, 0.3, (500, 8))
    off = rng.normal(0, 2, (200, 2)) @ basis[:, :2].T + rng.normal(0, 0.3, (200, 8)) + 0.9 * basis[:, 2]
    write("plane_offset", inside, off)


if __name__ == "__main__":
    main()
