"""Time the compiled kernels against the numpy fallback on training-sized inputs.

Run with ``python3 benchmarks/bench_kernels.py``.
"""
import timeit

import numpy as np

from handball_oracle.kernels import compiled_available, get_backend


def cases(rng):
    embedding = rng.normal(size=(2001, 25))
    tokens = rng.integers(0, 2001, size=(64, 32))
    grad_flat = rng.normal(size=(64, 32 * 25))
    w = rng.normal(size=(811, 256))
    g = rng.normal(size=w.shape)
    lat1, lon1, lat2, lon2 = (rng.uniform(-80, 80, size=10_000) for _ in range(4))
    return {
        "embed_gather (64x32, m=25)": lambda k: k.embed_gather(embedding, tokens),
        "embed_scatter_add (64x32, m=25)": lambda k: k.embed_scatter_add(grad_flat, tokens, 2001),
        "adam_update (811x256)": lambda k, m=np.zeros_like(w), v=np.zeros_like(w), p=w.copy():
            k.adam_update(p, g, m, v, 1e-3, 0.9, 0.999, 1e-8, 1),
        "haversine_many (10k pairs)": lambda k: k.haversine_many(lat1, lon1, lat2, lon2),
    }


def best_of(fn, kernels, number=200, repeat=5):
    return min(timeit.repeat(lambda: fn(kernels), number=number, repeat=repeat)) / number


def main():
    backends = ["numpy"] + (["cython"] if compiled_available() else [])
    print(f"{'kernel':34s}" + "".join(f"{b:>14s}" for b in backends) + ("       speedup" if len(backends) == 2 else ""))
    for name, fn in cases(np.random.default_rng(0)).items():
        times = [best_of(fn, get_backend(b)) for b in backends]
        line = f"{name:34s}" + "".join(f"{t * 1e6:11.1f} us" for t in times)
        if len(times) == 2:
            line += f"{times[0] / times[1]:13.2f}x"
        print(line)


if __name__ == "__main__":
    main()
