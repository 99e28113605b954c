"""Compare the compiled element kernels with the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--n 32] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from stokesmpe import kernels
from stokesmpe.fem import build_dof_map, cell_values
from stokesmpe.mesh import ELASTIC, build_two_square_mesh


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=32, help="cells per square edge")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    dmap = build_dof_map(build_two_square_mesh(args.n), ELASTIC, 2, 2)
    cv = cell_values(dmap)
    rng = np.random.default_rng(0)
    vals = rng.normal(size=(*cv.wdet.shape, 2))
    cases = {
        "mass": ((cv.phi, cv.phi, cv.wdet), kernels.py_mass, "mass"),
        "grad_outer": ((cv.dphi, cv.dphi, cv.wdet), kernels.py_grad_outer, "grad_outer"),
        "val_grad": ((cv.phi, cv.dphi, cv.wdet), kernels.py_val_grad, "val_grad"),
        "weighted_sq_sum": ((vals, cv.wdet), kernels.py_weighted_sq_sum, "weighted_sq_sum"),
    }
    # the dispatcher keeps numpy for mass; the compiled version is timed for reference
    print(f"{dmap.n_cells} elastic cells, {cv.wdet.shape[1]} quadrature points, backend={kernels.BACKEND}")
    print(f"{'kernel':<16} {'numpy [ms]':>11} {'cython [ms]':>12} {'speedup':>8}")
    for name, (arrs, py, attr) in cases.items():
        t_py = min(timeit.repeat(lambda: py(*arrs), number=1, repeat=args.repeat)) * 1e3
        if kernels._ext is None:
            print(f"{name:<16} {t_py:11.2f} {'n/a':>12} {'n/a':>8}")
            continue
        ext = getattr(kernels._ext, attr)
        arrs = tuple(np.ascontiguousarray(a) for a in arrs)
        np.testing.assert_allclose(ext(*arrs), py(*arrs), rtol=1e-12, atol=1e-12)
        t_c = min(timeit.repeat(lambda: ext(*arrs), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<16} {t_py:11.2f} {t_c:12.2f} {t_py / t_c:8.2f}")


if __name__ == "__main__":
    main()
