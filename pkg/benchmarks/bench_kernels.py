"""Time the numba and numpy kernel paths side by side and check they agree.

    python3 benchmarks/bench_kernels.py                 # desk-size shapes, batch 2
    python3 benchmarks/bench_kernels.py --primary 2048  # smaller routing layer
    CWSS_NUMBA=0 python3 benchmarks/bench_kernels.py --model
    CWSS_NUMBA=1 python3 benchmarks/bench_kernels.py --model

The kernel table calls both ``*_numba`` and ``*_numpy`` implementations
directly.  ``--model`` instead times one full training step through the
dispatching kernels, so the backend is whatever ``CWSS_NUMBA`` selected.
"""

import argparse
import time

import numpy as np
from threadpoolctl import threadpool_limits

from cwss import _kernels as K


def best_of(fn, repeat):
    fn()  # compile / warm caches
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def max_diff(a, b):
    if isinstance(a, tuple):
        return max(max_diff(x, y) for x, y in zip(a, b) if x is not None)
    a, b = np.asarray(a, np.float64), np.asarray(b, np.float64)
    return float(np.abs(a - b).max() / max(1e-30, np.abs(b).max()))


def kernel_cases(n, ni, rng):
    nj, dp, dd = 27, 8, 16
    u = (rng.standard_normal((n, ni, dp)) * 0.2).astype(np.float32)
    W = (rng.standard_normal((ni, nj, dp, dd)) * 0.05).astype(np.float32)
    uhat = K.uhat_forward_numpy(u, W)
    c = np.full((n, ni, nj), 1.0 / nj, np.float32)
    gs = rng.standard_normal((n, nj, dd)).astype(np.float32)
    x = rng.random((n, 256, 34, 34)).astype(np.float32)
    cols = K.im2col_numpy(x, 9, 9, 2)
    p = rng.standard_normal(W.size).astype(np.float32)
    g = rng.standard_normal(W.size).astype(np.float32)

    def adam(impl):
        # fresh state each call so repeated timings do the same work
        q, m, v = p.copy(), np.zeros_like(p), np.zeros_like(p)
        impl(q, g, m, v, 1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001)
        return q

    return [
        ("im2col 9x9/2", lambda f: f(x, 9, 9, 2), K.im2col_numba, K.im2col_numpy),
        ("col2im 9x9/2", lambda f: f(cols, x.shape, 9, 9, 2), K.col2im_numba, K.col2im_numpy),
        ("uhat forward", lambda f: f(u, W), K.uhat_forward_numba, K.uhat_forward_numpy),
        ("vote backward", lambda f: f(u, W, c, gs), K.vote_backward_numba, K.vote_backward_numpy),
        ("routing r=3", lambda f: f(uhat, 3)[4], K.route_numba, K.route_numpy),
        ("adam update", adam, K.adam_update_numba, K.adam_update_numpy),
    ]


def bench_kernels(args):
    rng = np.random.default_rng(0)
    print(f"batch {args.batch}, {args.primary} primary capsules, best of {args.repeat}")
    print(f"{'kernel':<15}{'numba ms':>11}{'numpy ms':>11}{'speedup':>9}{'rel diff':>11}")
    for name, call, nb, npy in kernel_cases(args.batch, args.primary, rng):
        diff = max_diff(call(nb), call(npy))
        t_nb = best_of(lambda: call(nb), args.repeat)
        t_np = best_of(lambda: call(npy), args.repeat)
        print(f"{name:<15}{t_nb * 1e3:>11.2f}{t_np * 1e3:>11.2f}{t_np / t_nb:>8.1f}x{diff:>11.1e}")


def bench_model(args):
    from cwss.capsule import ArchitectureConfig, init_params
    from cwss.tensor import backward
    from cwss.training import LossConfig, batch_loss

    cfg = ArchitectureConfig.desk() if args.preset == "desk" else ArchitectureConfig.reduced()
    params = init_params(cfg, seed=0)
    rng = np.random.default_rng(0)
    images = rng.random((args.batch, 3, cfg.input_size, cfg.input_size)).astype(np.float32)
    targets = np.zeros((args.batch, 27), np.uint8)
    targets[:, 0] = 1

    def step():
        weights = params.tensors(requires_grad=True)
        loss = batch_loss(images, targets, params, weights, LossConfig(), 5e-4)[0]
        backward(loss, list(weights.values()))

    t = best_of(step, args.repeat)
    print(f"backend {K.backend()}: {args.preset} forward+backward, batch {args.batch}: {t:.3f} s")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--batch", type=int, default=2)
    ap.add_argument("--primary", type=int, default=23328, help="primary capsule count (desk: 23328)")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--model", action="store_true", help="time a full step with the CWSS_NUMBA backend")
    ap.add_argument("--preset", choices=("desk", "reduced"), default="desk")
    args = ap.parse_args()
    with threadpool_limits(limits=args.threads):
        bench_model(args) if args.model else bench_kernels(args)


if __name__ == "__main__":
    main()
