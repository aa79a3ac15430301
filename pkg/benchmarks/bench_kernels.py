"""
Benchmark the frame-propagation kernels: compiled numba loops vs plain numpy.

Both backends integrate the L+ and N unstable bundles of the KH profile at
lambda = 0 across the default domain, first one path at a time and then a
batch of lambda values sharing one potential table (the Gamma2 sweep pattern).

    python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from nls4maslov import _kernels
from nls4maslov.bundles import DEFAULT_CONFIG, _grid, _potential_table, x_start_for
from nls4maslov.profiles import kh_profile
from nls4maslov.systems import LinearSystem, graph_frame, unstable_frame

ELL = 6.0
N_BATCH = 32


def time_function(func, *args, n_runs=5, **kwargs):
    """Mean and spread of wall time over n_runs calls."""
    times = []
    for _ in range(n_runs):
        start = time.perf_counter()
        result = func(*args, **kwargs)
        times.append(time.perf_counter() - start)
    return np.mean(times), np.std(times), result


def subspace_gap(a, b):
    """Largest projector difference; frames may differ by a renormalization."""
    qa = np.linalg.qr(a)[0]
    qb = np.linalg.qr(b)[0]
    pa = qa @ np.swapaxes(qa, -1, -2)
    pb = qb @ np.swapaxes(qb, -1, -2)
    return float(np.max(np.abs(pa - pb)))


def setup(kind):
    system = LinearSystem(kind, kh_profile())
    x0 = x_start_for(system, 0.0, DEFAULT_CONFIG)
    start, step, n = _grid(ELL, x0, DEFAULT_CONFIG.h)
    q = _potential_table(system.profile, start, step, n)
    lams = np.linspace(0.01, 1.0, N_BATCH)
    C0s = np.stack([system.C_const(l) for l in lams])
    Z0s = np.stack([graph_frame(unstable_frame(l, kind, system.params)) for l in lams])
    return system, q, step, n, C0s, Z0s


print("=" * 60)
print("Frame propagation benchmark (KH profile, h = %.3g)" % DEFAULT_CONFIG.h)
print("=" * 60)
print(f"Numba available: {_kernels.HAVE_NUMBA}")
backends = ["numba", "numpy"] if _kernels.HAVE_NUMBA else ["numpy"]
print()

for kind in ("LPlus", "N"):
    system, q, step, n, C0s, Z0s = setup(kind)
    print("-" * 60)
    print(f"{kind}: {n} steps, frame {Z0s.shape[1]}x{Z0s.shape[2]}, batch of {N_BATCH}")
    print("-" * 60)

    if _kernels.HAVE_NUMBA:
        # compile outside the timed region
        _kernels.propagate(system.B, C0s[0], system.E, q, Z0s[0], step, backend="numba")
        _kernels.propagate_batch(system.B, C0s[:2], system.E, q, Z0s[:2], step, backend="numba")

    single, batch = {}, {}
    for be in backends:
        m, s, (frames, _, _) = time_function(
            _kernels.propagate, system.B, C0s[0], system.E, q, Z0s[0], step, backend=be
        )
        single[be] = (m, frames[-1])
        print(f"propagate        [{be:5s}]: {m * 1e3:9.2f} +/- {s * 1e3:.2f} ms")
        m, s, (Zf, _) = time_function(
            _kernels.propagate_batch, system.B, C0s, system.E, q, Z0s, step, backend=be, n_runs=3
        )
        batch[be] = (m, Zf)
        print(f"propagate_batch  [{be:5s}]: {m * 1e3:9.2f} +/- {s * 1e3:.2f} ms")

    if len(backends) == 2:
        d1 = subspace_gap(single["numba"][1], single["numpy"][1])
        d2 = subspace_gap(batch["numba"][1], batch["numpy"][1])
        print(f"speedup single: {single['numpy'][0] / single['numba'][0]:.1f}x  "
              f"batch: {batch['numpy'][0] / batch['numba'][0]:.1f}x")
        print(f"subspace gap of final frames: single {d1:.2e}, batch {d2:.2e}")
    print()
