#!/usr/bin/env python3
"""Time the numba kernels against the pure-numpy fallback.

The backend is frozen at import, so this script re-executes itself in a
subprocess per backend (BQ_BACKEND=numba / BQ_BACKEND=numpy) and compares:

* the fused pointwise right-hand-side products,
* the weighted reductions (p-norms, dissipation integrals, overshoots),
* a full solver step at production resolution.

Usage: python benchmarks/bench_backends.py [--nx 128 --ny 64 --repeat 200]
"""

import argparse
import json
import os
import subprocess
import sys
import time


def measure(nx: int, ny: int, repeat: int) -> dict:
    import numpy as np

    from bqchan import _kernels
    from bqchan.coefficients import get_model
    from bqchan.spectral import Grid
    from bqchan.timestepper import Stepper, StepperConfig, initial_state

    grid = Grid(nx, ny)
    rng = np.random.default_rng(0)
    shape = (nx, ny + 1)
    arrays = [rng.normal(size=shape) for _ in range(9)]
    model = get_model("quadratic-kappa")

    def bench(fn, n=repeat):
        fn()  # warm-up / JIT
        t0 = time.perf_counter()
        for _ in range(n):
            fn()
        return (time.perf_counter() - t0) / n

    out = {"backend": _kernels.backend_name(), "nx": nx, "ny": ny}
    out["rhs_products_us"] = 1e6 * bench(
        lambda: _kernels.rhs_products(*arrays, model.kind, model.params)
    )
    out["pnorm4_us"] = 1e6 * bench(lambda: _kernels.pnorm_pow(arrays[0], grid.wy, 4.0))
    out["dissipation_us"] = 1e6 * bench(
        lambda: _kernels.weighted_quadratic(np.abs(arrays[0]), arrays[3], arrays[4], grid.wy)
    )
    out["overshoot_us"] = 1e6 * bench(lambda: _kernels.overshoot_integrals(arrays[0], grid.wy))

    s = initial_state(grid, "random-smooth", amplitude=0.4, theta_amplitude=0.4, seed=1)
    stepper = Stepper(model, StepperConfig(dt=2e-5, t_end=1.0))
    s = stepper.step(s)

    def one_step():
        nonlocal s
        s = stepper.step(s)

    out["solver_step_us"] = 1e6 * bench(one_step, n=max(repeat // 4, 20))
    return out


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--nx", type=int, default=128)
    parser.add_argument("--ny", type=int, default=64)
    parser.add_argument("--repeat", type=int, default=200)
    parser.add_argument("--single", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.single:
        print(json.dumps(measure(args.nx, args.ny, args.repeat)))
        return 0

    results = {}
    for backend in ("numpy", "numba"):
        env = dict(os.environ, BQ_BACKEND=backend)
        cmd = [
            sys.executable,
            os.path.abspath(__file__),
            "--single",
            "--nx",
            str(args.nx),
            "--ny",
            str(args.ny),
            "--repeat",
            str(args.repeat),
        ]
        proc = subprocess.run(cmd, env=env, capture_output=True, text=True)
        if proc.returncode != 0:
            print(proc.stderr, file=sys.stderr)
            return 1
        results[backend] = json.loads(proc.stdout.strip().splitlines()[-1])

    keys = [k for k in results["numpy"] if k.endswith("_us")]
    width = max(len(k) for k in keys)
    print(f"grid {args.nx}x{args.ny}, {args.repeat} repetitions")
    print(f"{'kernel':<{width}}  {'numpy':>12}  {'numba':>12}  speedup")
    for k in keys:
        a = results["numpy"][k]
        b = results["numba"][k]
        print(f"{k:<{width}}  {a:>10.1f}us  {b:>10.1f}us  {a / b:6.2f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
