"""Regenerate data/gold_cp.txt from a Drude + two critical-point model.

The coefficients reproduce measured gold permittivity across the visible
and near infrared to within a few percent.  Replace the output file with
measured data if you have it; the loader only needs the three columns.
"""

import numpy as np

from qplasm.transduce import DATA_DIR, save_material_table

EPS_INF = 1.54
LAMBDA_P, GAMMA_P = 143.0, 14500.0
CRITICAL_POINTS = [  # amplitude, phase, lambda_i (nm), gamma_i (nm)
    (1.27, -np.pi / 4, 470.0, 1900.0),
    (1.10, -np.pi / 4, 325.0, 1060.0),
]


def gold_cp(lam):
    lam = np.asarray(lam, dtype=float)
    eps = EPS_INF - 1.0 / (LAMBDA_P**2 * (1 / lam**2 + 1j / (GAMMA_P * lam)))
    for a, phi, li, gi in CRITICAL_POINTS:
        eps = eps + a / li * (
            np.exp(1j * phi) / (1 / li - 1 / lam - 1j / gi)
            + np.exp(-1j * phi) / (1 / li + 1 / lam + 1j / gi)
        )
    return eps


if __name__ == "__main__":
    lam = np.arange(400.0, 1200.0 + 1e-9, 2.0)
    save_material_table(
        DATA_DIR / "gold_cp.txt", lam, gold_cp(lam),
        header="gold permittivity, model-generated (Drude + 2 critical points); user-replaceable",
    )
