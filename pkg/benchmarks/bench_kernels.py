"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py --cells 8192 --steps 200

Reports ns per cell-update for both Verlet loops and checks that the two
backends agree to rounding on the same input.
"""

import argparse
import time

import numpy as np

from critwave._backend import available, get_backend
from critwave.nonlinearity import DEFAULT_POLICY


def physical_case(n, dr):
    r = (np.arange(n) + 0.5) * dr
    u = 1.2 * np.exp(-((r - 1.0) / 0.3) ** 2)
    return u, np.zeros(n)


def conformal_case(n, dR):
    R = (np.arange(n) + 0.5) * dR
    U = 0.8 * np.exp(-((R - 0.3) / 0.1) ** 2)
    return U, np.zeros(n)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, default=8192)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    n, k = args.cells, args.steps
    dr = 4.0 / n
    thr = DEFAULT_POLICY.switch_threshold
    c_phys = DEFAULT_POLICY.coefficients(2, thr**2)
    c_conf = DEFAULT_POLICY.coefficients(2)
    out = {}
    for name in available():
        kern = get_backend(name)

        def phys():
            u, w = physical_case(n, dr)
            kern.verlet_run(u, w, dr, 0.5 * dr, k, n, 1, 0.0, thr, c_phys)
            return u

        def conf():
            U, W = conformal_case(n, 1.0 / n)
            kern.conformal_run(U, W, 1.0 / n, 1.0, -0.5 / n, k, thr, c_conf)
            return U

        tp = best_of(phys, args.repeat)
        tc = best_of(conf, args.repeat)
        out[name] = (phys(), conf())
        print(f"{name:>7}: physical {tp / (n * k) * 1e9:8.2f} ns/cell-step   "
              f"conformal {tc / (n * k) * 1e9:8.2f} ns/cell-step")
    if len(out) == 2:
        (pa, ca), (pb, cb) = out.values()
        print(f"max |difference|: physical {np.max(np.abs(pa - pb)):.3g}, "
              f"conformal {np.max(np.abs(ca - cb)):.3g}")


if __name__ == "__main__":
    main()
