"""Compare the compiled kernels with the numpy fallback.

Times each kernel on the matrix sizes a campaign actually uses, then a short
``mc`` campaign under each backend (selected through CAPDETECT_PURE_PYTHON in a
subprocess, since the backend is fixed at import).

    python3 benchmarks/bench_kernels.py [--repeat 5] [--n 200]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from capdetect._backend import available_backends


def cases(rng):
    def cm(*shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    V = np.linalg.qr(cm(8, 3))[0]
    a = cm(3, 3)
    rho = a @ a.conj().T
    rho /= np.trace(rho).real
    m8 = cm(8, 8)
    b = cm(4, 4)
    psd = b @ b.conj().T
    g = cm(8, 3)
    m6 = cm(6, 6)
    return {
        "apply_pair 3->4x2": lambda k: k.apply_pair(V, rho, 4, 2),
        "partial_trace 8x8": lambda k: k.partial_trace(m8, False, 4, 2),
        "gram_schmidt 8x3": lambda k: k.gram_schmidt(g),
        "det_r 4x4 r=2": lambda k: k.det_r(psd, 2),
        "det_r 6x6 r=3": lambda k: k.det_r(m6, 3),
        "kron 3x3 (x) 4x4": lambda k: k.kron(a, b),
    }


def bench_kernels(repeat, number):
    backends = available_backends()
    if len(backends) < 2:
        print("compiled backend not built; only the fallback is timed")
    rng = np.random.default_rng(0)
    names = [k.NAME for k in backends]
    print(f"{'kernel':<22}" + "".join(f"{n + ' (us)':>16}" for n in names) + f"{'speed-up':>12}")
    for label, fn in cases(rng).items():
        times = []
        for k in backends:
            t = min(timeit.repeat(lambda: fn(k), repeat=repeat, number=number)) / number
            times.append(t * 1e6)
        row = f"{label:<22}" + "".join(f"{t:>16.2f}" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:>11.1f}x"
        print(row)


def bench_campaign(n):
    code = (
        "import time\n"
        "from capdetect.harness import ExperimentConfig, run_campaign\n"
        "from capdetect._backend import BACKEND\n"
        f"cfg = ExperimentConfig(d=3, d_out=4, d_env=2, n_samples={n}, seed=42)\n"
        "t = time.perf_counter(); run_campaign(cfg, threads=1)\n"
        "print(BACKEND, time.perf_counter() - t)\n"
    )
    print(f"\nmc (3,4,2), n={n}, 1 thread")
    for pure in (False, True):
        env = dict(os.environ)
        env.pop("CAPDETECT_PURE_PYTHON", None)
        if pure:
            env["CAPDETECT_PURE_PYTHON"] = "1"
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        name, secs = out.stdout.split()
        print(f"  {name:<8} {float(secs):8.3f} s")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--number", type=int, default=2000)
    p.add_argument("--n", type=int, default=200, help="campaign size")
    a = p.parse_args()
    bench_kernels(a.repeat, a.number)
    bench_campaign(a.n)


if __name__ == "__main__":
    main()
