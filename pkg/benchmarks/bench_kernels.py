"""Compare the compiled and NumPy kernels on the stencil workload.

    python3 benchmarks/bench_kernels.py [--sizes 31 63 127] [--repeat 5]

For each square grid the script times CSR assembly, one matrix-vector
product and one Jacobi-PCG solve with a variable coefficient, and reports
the best of ``--repeat`` runs per backend.
"""
import argparse
import time

import numpy as np

from degensys import _pykernels, kernels
from degensys.discretization import face_average
from degensys.grid import Grid, ScalarField


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def workload(n, seed=0):
    grid = Grid.unit(n, 2)
    rng = np.random.default_rng(seed)
    d = ScalarField(grid, np.exp(rng.uniform(-2, 2, grid.size)))
    faces = face_average(d)
    h = grid.spacing
    rhs = rng.normal(size=grid.size)
    return (faces.x, faces.y, h[0], h[1]), rhs


def bench(backend, args, rhs, repeat, tol):
    indptr, indices, data = backend.assemble_csr(*args)
    t_asm = best_of(lambda: backend.assemble_csr(*args), repeat)
    t_mv = best_of(lambda: backend.csr_matvec(indptr, indices, data, rhs), repeat)
    maxiter = 10 * rhs.size
    t_cg = best_of(lambda: backend.pcg(indptr, indices, data, rhs, tol, maxiter), repeat)
    x, its, _ = backend.pcg(indptr, indices, data, rhs, tol, maxiter)
    return t_asm, t_mv, t_cg, its, x


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[31, 63, 127])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--tol", type=float, default=1e-10)
    args = ap.parse_args(argv)

    backends = [("python", _pykernels)]
    if kernels.compiled_backend is not None:
        backends.insert(0, ("compiled", kernels.compiled_backend))
    else:
        print("compiled extension not available; timing the NumPy fallback only")

    print("%-6s %-9s %11s %11s %11s %6s" % ("n", "backend", "assemble_s", "matvec_s", "pcg_s", "iters"))
    for n in args.sizes:
        work, rhs = workload(n)
        results = {}
        for name, backend in backends:
            t_asm, t_mv, t_cg, its, x = bench(backend, work, rhs, args.repeat, args.tol)
            results[name] = (t_cg, x)
            print("%-6d %-9s %11.3e %11.3e %11.3e %6d" % (n, name, t_asm, t_mv, t_cg, its))
        if len(results) == 2:
            (tc, xc), (tp, xp) = results["compiled"], results["python"]
            gap = np.max(np.abs(xc - xp)) / max(np.max(np.abs(xp)), 1e-300)
            print("%-6d speedup pcg %.1fx, max relative solution gap %.1e" % (n, tp / tc, gap))


if __name__ == "__main__":
    main()
