"""Time the compiled group kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--n 5000] [--p 64] [--classes 10] [--repeat 5]

Each line reports the best of ``--repeat`` runs per backend and the speedup
of the compiled kernels, after checking that both backends agree.
"""
import argparse
import timeit

import numpy as np

from airreg import kernels
from airreg.data_io import BlobSpec, generate_blobs
from airreg.regularizer import RegConfig, group_activations, prox_all
from airreg.sadmm import SolverConfig, init_state, make_problem, step
from airreg.losses import MiniBatch


def cases(data, backend, threads):
    reg = RegConfig(lambda_g=0.05)
    prob = make_problem(data, reg, backend=backend, threads=threads)
    op = prob.op
    rng = np.random.default_rng(0)
    w = rng.normal(size=(data.p, data.num_classes))
    v = op.forward(w)
    alpha = np.full(op.n_groups, 0.3)
    cfg = SolverConfig(reg=reg, rho_max=10, threads=threads, backend=backend)
    state = init_state(prob, cfg)
    batch = MiniBatch.sample(data.n, 100, rng)
    return {
        "forward F w": lambda: op.forward(w, threads=threads),
        "adjoint F^T v": lambda: op.adjoint(v, threads=threads),
        "gram diagonal": lambda: op.gram_diagonal(threads=threads),
        "group prox": lambda: prox_all(v, alpha, threads=threads, backend=backend),
        "group norms": lambda: group_activations(v, threads=threads, backend=backend),
        "sadmm step": lambda: step(state, prob, cfg, batch),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--p", type=int, default=64)
    ap.add_argument("--classes", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    data = generate_blobs(BlobSpec(args.n, args.p, args.classes, 3.0, 1.0, seed=0))
    names = kernels.available()
    print(f"n={args.n} p={args.p} C={args.classes} groups={args.n * args.classes} "
          f"threads={args.threads} backends={names}")
    results = {b: cases(data, b, args.threads) for b in names}

    # agreement before timing
    first = results[names[0]]
    for b in names[1:]:
        for key in ("forward F w", "adjoint F^T v", "group prox"):
            np.testing.assert_allclose(first[key](), results[b][key](), rtol=1e-12, atol=1e-12)

    print(f"{'kernel':<16}" + "".join(f"{b + ' (ms)':>16}" for b in names) + f"{'speedup':>10}")
    for key in first:
        times = []
        for b in names:
            fn = results[b][key]
            number = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-6)))
            times.append(min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number * 1e3)
        speed = f"{times[-1] / times[0]:.1f}x" if len(times) == 2 else "-"
        print(f"{key:<16}" + "".join(f"{t:>16.3f}" for t in times) + f"{speed:>10}")


if __name__ == "__main__":
    main()
