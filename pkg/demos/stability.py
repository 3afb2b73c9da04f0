"""Worst-case perturbations: FIRENET against an unstable linear inverse.

Both maps are attacked with the same momentum ascent, with perturbations
fixed at 5% of the measurement norm. The printout compares how far each
reconstruction moves relative to the size of the perturbation.

    python3 demos/stability.py
"""
import argparse

import numpy as np

from firenet.adversarial import AttackConfig, FirenetMap, perturbation_search, unstable_least_squares
from firenet.phantoms import reference_level_model, test_image
from firenet.sampling import MeasurementOperator, scheme_for_fraction
from firenet.solver import SolverConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fraction", type=float, default=0.25)
    ap.add_argument("--ratio", type=float, default=0.05, help="||A r|| / ||A x||")
    ap.add_argument("--steps", type=int, default=30)
    ap.add_argument("--restarts", type=int, default=2)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    lm = reference_level_model(6, 2)
    scheme, _ = scheme_for_fraction(lm, "fourier", 2, args.fraction, 0, full_levels=3,
                                    replacement=False, compensate=False)
    op_c = MeasurementOperator(scheme, "coeffs")
    op_i = MeasurementOperator(scheme, "image")
    x = test_image(64).astype(complex)
    y = op_i.forward(x)
    attack = AttackConfig(steps=args.steps, restarts=args.restarts, target_ratio=args.ratio, seed=args.seed)

    cfg = SolverConfig(lam=0.00025, tau=0.99, sigma=0.99, p=5, n=15, w=lm.weight_vector())
    maps = {
        "FIRENET": FirenetMap(op_c, cfg, eps0=float(np.linalg.norm(y))),
        "unstable LS": unstable_least_squares(op_i, 1e-4, output_shape=x.shape),
    }
    print(f"{'map':>12} {'||Ar||':>9} {'change':>11} {'ratio':>10} {'error':>11} {'clean error':>11}")
    for name, recon in maps.items():
        rep = perturbation_search(recon, op_i, x, attack)
        print(f"{name:>12} {rep.norms[1]:9.4f} {rep.norms[2]:11.4e} {rep.lipschitz_ratio:10.3e} "
              f"{rep.damage:11.4e} {rep.baseline_error:11.4e}")


if __name__ == "__main__":
    main()
