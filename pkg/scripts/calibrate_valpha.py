"""Empirical sup of (2g+1)|V(xi)-V(eta)| / ((1+|xi|^2+|eta|^2)^g |xi-eta|), g=(1-alpha)/2.

The printed maximum (times a 10% headroom) is the constant stored as
``VALPHA_UPPER_CONSTANT`` in ``bdvarmin.integrands``.
"""

import argparse

import numpy as np

from bdvarmin.integrands import v_alpha
from bdvarmin.grid import frob_norm


def sample(rng, n, lo=1e-3, hi=1e3):
    z = rng.standard_normal((n, 3))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    z *= np.array([1.0, 1.0 / np.sqrt(2.0), 1.0])
    return z * np.exp(rng.uniform(np.log(lo), np.log(hi), n))[:, None]


def pair_constant(alpha, n, rng):
    g = 0.5 * (1.0 - alpha)
    x = sample(rng, n)
    pairs = [sample(rng, n), -x, x * rng.uniform(0, 2, (n, 1)), x + 1e-4 * sample(rng, n)]
    best = 0.0
    for y in pairs:
        d = frob_norm(x - y)
        ok = d > 0
        ratio = frob_norm(v_alpha(x, alpha) - v_alpha(y, alpha)) / (1 + frob_norm(x) ** 2 + frob_norm(y) ** 2) ** g
        best = max(best, float(np.max(ratio[ok] / d[ok]) * (2 * g + 1)))
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for alpha in np.linspace(1.01, 1.99, 50):
        c = pair_constant(alpha, args.n, rng)
        worst = max(worst, c)
        print(f"alpha={alpha:.3f}  sup={c:.6f}")
    print(f"max over alpha: {worst:.6f}; stored constant: {1.1 * worst:.3f}")


if __name__ == "__main__":
    main()
