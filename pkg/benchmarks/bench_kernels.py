"""Time the compiled warp kernels against the numpy fallback.

Run from the repo root:

    python3 benchmarks/bench_kernels.py

Both backends are imported directly (ignoring MAKEUPLAB_PURE_PYTHON) so the
same process can compare them. The outputs are checked for bit equality
before timing; a speedup column of "-" means the extension is not built.
"""

import time

import numpy as np
from scipy.spatial import Delaunay

from makeuplab.kernels import backends


def _layout(n_side, size, jitter=1.5, seed=0):
    g = np.linspace(2.0, size - 3.0, n_side)
    xx, yy = np.meshgrid(g, g)
    src = np.stack([xx.ravel(), yy.ravel()], axis=1)
    rng = np.random.default_rng(seed)
    dst = src + rng.uniform(-jitter, jitter, src.shape)
    return src, dst


def _best_of(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    impls = backends()
    if "native" not in impls:
        print("note: compiled extension not importable, timing the fallback only")

    rng = np.random.default_rng(1)
    rows = []
    for size in (64, 128, 256, 512):
        src, dst = _layout(9, size)
        simplices = Delaunay(dst).simplices
        img = rng.random((size, size, 3)).astype(np.float32)

        coords = {}
        for name, impl in impls.items():
            coords[name] = impl.warp_coords(src, dst, simplices, size, size)
        if "native" in coords:
            for a, b in zip(coords["python"], coords["native"]):
                assert np.array_equal(a, b), "backends disagree on warp_coords"
            sy, sx = coords["native"]
            assert np.array_equal(
                impls["python"].bilinear_sample(img, sy, sx),
                impls["native"].bilinear_sample(img, sy, sx),
            ), "backends disagree on bilinear_sample"
        sy, sx = coords["python"]

        for op, call in (
            ("warp_coords", lambda impl: impl.warp_coords(src, dst, simplices, size, size)),
            ("bilinear_sample", lambda impl: impl.bilinear_sample(img, sy, sx)),
        ):
            times = {name: _best_of(lambda: call(impl)) for name, impl in impls.items()}
            ratio = times["python"] / times["native"] if "native" in times else None
            rows.append((op, size, times.get("python"), times.get("native"), ratio))

    print(f"{'op':<16} {'size':>5} {'python ms':>10} {'native ms':>10} {'speedup':>8}")
    for op, size, t_py, t_nat, ratio in rows:
        nat = f"{t_nat * 1e3:10.2f}" if t_nat is not None else f"{'-':>10}"
        spd = f"{ratio:7.1f}x" if ratio is not None else f"{'-':>8}"
        print(f"{op:<16} {size:>5} {t_py * 1e3:10.2f} {nat} {spd}")


if __name__ == "__main__":
    main()
