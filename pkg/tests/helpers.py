"""Shared test utilities: finite-difference gradient oracle and a pure-Python
reference implementation of the counter-based generator."""

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def ref_mix64(z: int) -> int:
    """splitmix64 finalizer, transcribed with plain Python integers."""
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def ref_raw_stream(seed: int, count: int) -> list[int]:
    """First `count` raw 64-bit words of the generator with the given seed."""
    key = ref_mix64(seed & _MASK64)
    return [ref_mix64((key + k * _GAMMA) & _MASK64) for k in range(1, count + 1)]


def ref_uniform_stream(seed: int, count: int) -> list[float]:
    return [((w >> 11) + 0.5) * 2.0**-53 for w in ref_raw_stream(seed, count)]


def central_diff(f, arrays, step=1e-5):
    """Gradient of the scalar function f() w.r.t. every entry of `arrays`.

    f must read the arrays by reference; they are perturbed in place and
    restored. Returns one gradient array per input array.
    """
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + step
            hi = f()
            arr[idx] = orig - step
            lo = f()
            arr[idx] = orig
            g[idx] = (hi - lo) / (2.0 * step)
        grads.append(g)
    return grads


def max_rel_err(a, b, floor=1e-8):
    """Largest elementwise relative error with an absolute floor."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float((np.abs(a - b) / denom).max())
