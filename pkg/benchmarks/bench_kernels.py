"""Timing comparison of the compiled and pure-numpy kernel backends.

Runs the three hot kernels at working sizes and prints per-call times and
the native speedup. Usage: python3 benchmarks/bench_kernels.py [--quick]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from wavectrl.kernels import get_backend, has_native


def timeit(fn, repeat: int) -> float:
    fn()  # warm-up
    best = np.inf
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_acoustic(backend, ny: int, nx: int, repeat: int) -> float:
    rng = np.random.default_rng(0)
    w = rng.standard_normal((6, ny, nx))
    c2 = rng.uniform(1.0e6, 2.5e6, (ny, nx))
    dfdx = rng.standard_normal((ny, nx))
    dfdy = rng.standard_normal((ny, nx))
    sx = np.abs(rng.standard_normal(nx)) * 1e3
    sy = np.abs(rng.standard_normal(ny)) * 1e3
    out = np.empty_like(w)

    def step():
        backend.acoustic_rk4_step(
            w, c2, c2, c2, dfdx, dfdy, sx, sy, 1000.0, 0.0, 1e-5, 0.1, 0.1, out
        )

    return timeit(step, repeat)


def bench_latent(backend, b: int, n: int, spa: int, repeat: int) -> tuple[float, float]:
    rng = np.random.default_rng(1)
    y0 = rng.standard_normal((4, b, n)) * 0.01
    c0 = rng.uniform(1e3, 2e3, (b, n))
    c1 = rng.uniform(1e3, 2e3, (b, n))
    sigma = np.abs(rng.standard_normal((b, n))) * 10
    dfdx = rng.standard_normal((b, n))
    t0 = rng.uniform(0, 1e-2, b)
    sig = np.empty((3, b, spa))
    store = np.empty((spa + 1, 4, b, n))
    lam = rng.standard_normal((4, b, n)) * 0.01
    gs = rng.standard_normal((3, b, spa))
    grads = [np.zeros((b, n)) for _ in range(4)]
    args = (2.5e6, sigma, dfdx, 1000.0, t0, 1e-5, spa, 0.1)

    def fwd():
        backend.latent_window_forward(y0.copy(), c0, c1, *args, sig, store)

    def bwd():
        backend.latent_window_backward(
            lam.copy(), store, c0, c1, *args, gs[0], gs[1], gs[2], *grads
        )

    return timeit(fwd, repeat), timeit(bwd, repeat)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="fewer repeats")
    args = parser.parse_args()
    repeat = 3 if args.quick else 7

    if not has_native():
        print("native extension not built; only timing the numpy backend")
    rows = []
    cases = [
        ("acoustic rk4 step 128x128", lambda be: bench_acoustic(be, 128, 128, repeat)),
        ("acoustic rk4 step 256x256", lambda be: bench_acoustic(be, 256, 256, repeat)),
    ]
    for label, fn in cases:
        t_np = fn(get_backend("numpy"))
        t_nat = fn(get_backend("native")) if has_native() else np.nan
        rows.append((label, t_np, t_nat))

    for b, n, spa in ((32, 1024, 100), (256, 1024, 100)):
        f_np, b_np = bench_latent(get_backend("numpy"), b, n, spa, repeat)
        if has_native():
            f_nat, b_nat = bench_latent(get_backend("native"), b, n, spa, repeat)
        else:
            f_nat = b_nat = np.nan
        rows.append((f"latent fwd window B={b} n={n} spa={spa}", f_np, f_nat))
        rows.append((f"latent bwd window B={b} n={n} spa={spa}", b_np, b_nat))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'numpy':>10}  {'native':>10}  {'speedup':>7}")
    for label, t_np, t_nat in rows:
        speed = t_np / t_nat if np.isfinite(t_nat) else np.nan
        print(f"{label:<{width}}  {t_np * 1e3:>8.2f}ms  {t_nat * 1e3:>8.2f}ms  {speed:>6.1f}x")


if __name__ == "__main__":
    main()
