"""Time the solver kernels with numba and with the pure-numpy fallback.

Run ``python benchmarks/bench_kernels.py``. The script re-runs itself with
``VATSCM_DISABLE_NUMBA=1`` for the numpy column, so both backends are timed
in fresh processes. Numba timings exclude the first (compiling) call.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def cases():
    from vatscm import _kernels as K
    from vatscm.datagen import GenSpec, generate
    from vatscm.inference import placebo_test
    from vatscm.scm import fit_weights, solve

    rng = np.random.default_rng(0)
    v = rng.normal(size=25)
    X = 100 + rng.normal(0, 1, (12, 25)).cumsum(0)
    y = X @ rng.dirichlet(np.ones(25)) + rng.normal(0, 0.3, 12)
    panel, _ = generate(GenSpec(donor_count=25, noise_sd=0.3, seed=1))
    return K.backend(), {
        "project_simplex (J=25)": lambda: K.project_simplex(v),
        "solve (J=25, T=12)": lambda: solve(X, y),
        "fit_weights (datagen J=25)": lambda: fit_weights(panel),
        "placebo_test (26 fits)": lambda: placebo_test(panel),
    }


def measure(repeat: int) -> dict:
    backend, fns = cases()
    out = {"backend": backend}
    for name, fn in fns.items():
        fn()  # warm-up; compiles under numba
        n, t0 = 0, time.perf_counter()
        while n < repeat or time.perf_counter() - t0 < 0.2:
            fn()
            n += 1
        out[name] = (time.perf_counter() - t0) / n
    return out


def fmt(sec: float) -> str:
    return f"{sec * 1e6:10.1f} us" if sec < 1e-3 else f"{sec * 1e3:10.2f} ms"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5, help="minimum timed calls per case")
    ap.add_argument("--json", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.json:
        print(json.dumps(measure(args.repeat)))
        return

    runs = {}
    for flag in ("0", "1"):
        env = dict(os.environ, VATSCM_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, __file__, "--json", "--repeat", str(args.repeat)],
                             env=env, capture_output=True, text=True, check=True)
        r = json.loads(res.stdout)
        runs[r.pop("backend")] = r
    nb, np_ = runs.get("numba", {}), runs.get("numpy", {})
    print(f"{'case':28s} {'numba':>13s} {'numpy':>13s} {'speedup':>8s}")
    for name in np_:
        a, b = nb.get(name), np_[name]
        speed = f"{b / a:7.1f}x" if a else "     n/a"
        print(f"{name:28s} {fmt(a) if a else '          n/a':>13s} {fmt(b):>13s} {speed}")


if __name__ == "__main__":
    main()
