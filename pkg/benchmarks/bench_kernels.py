"""Time the numba and numpy paths of each hot kernel on the same inputs.

    python benchmarks/bench_kernels.py [--repeat 5]

Compilation is triggered once before timing.  Results of the two paths are
compared as well, so a speedup never hides a wrong answer.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from bethe_circuit import _kernels
from bethe_circuit.cba_core import MagnonSystem, _permutation_data
from bethe_circuit.circuit import build_circuit
from bethe_circuit.sectors import binomial_table, sector_masks


def _best(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def _cases(rng):
    # permutation sum: M=6 momenta on 12 sites
    r, k = 6, 12
    y = np.exp(1j * rng.uniform(-np.pi, np.pi, r))
    ypow = y[:, None] ** np.arange(1, k + 1)[None, :]
    perms, weights = _permutation_data(r)
    weights = weights * (1 + 0.1 * rng.standard_normal(len(weights)))
    configs = np.array([sorted(rng.choice(k, r, replace=False)) for _ in range(200)], dtype=np.int64)
    yield "permutation_sum", (ypow, perms, weights.astype(np.complex128), configs), _kernels.permutation_sum_numpy, _kernels.permutation_sum_numba

    # minor sweep on a 120 x 120 Hermitian positive definite matrix
    X = rng.standard_normal((120, 120)) + 1j * rng.standard_normal((120, 120))
    G = X.conj().T @ X + 120 * np.eye(120)
    yield "minor_sweep", (G, 1e-12), _kernels.minor_sweep_numpy, _kernels.minor_sweep_numba

    # gate application: every gate of an N=16, M=5 circuit on a 4368-dim sector
    N, M = 16, 5
    sys = MagnonSystem.from_momenta(N, rng.uniform(-3, 3, M) + 0.1j, 0.5)
    circ = build_circuit(sys)
    masks = np.asarray(sector_masks(M, N), dtype=np.int64)
    binom = binomial_table(N)
    amps = rng.standard_normal(len(masks)) + 0j
    gates = [(g.unitary, g.qubits[0] - 1, len(g.qubits)) for g in circ.gates]

    def run(apply):
        def go():
            a = amps
            for U, q0, w in gates:
                a = apply(a, masks, U, q0, w, N, binom)
            return a

        return go

    yield "apply_gate (16 sites)", None, run(_kernels.apply_gate_numpy), run(_kernels.apply_gate_numba)


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    rng = np.random.default_rng(args.seed)

    print(f"{'kernel':24s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s} {'max diff':>10s}")
    for name, inputs, slow, fast in _cases(rng):
        call_slow = (lambda: slow(*inputs)) if inputs is not None else slow
        call_fast = (lambda: fast(*inputs)) if inputs is not None else fast
        a, b = call_slow(), call_fast()  # warm-up and JIT compile
        a, b = (a[0], b[0]) if isinstance(a, tuple) else (a, b)
        diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
        t_slow, t_fast = _best(call_slow, args.repeat), _best(call_fast, args.repeat)
        print(f"{name:24s} {1e3 * t_slow:11.3f} {1e3 * t_fast:11.3f} {t_slow / t_fast:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
