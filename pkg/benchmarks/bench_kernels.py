"""Compare the compiled and pure-Python kernel backends.

Usage: python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from shiftdesign import kernels
from shiftdesign.design import DesignProblem, ShiftSequence, SolverConfig, assemble_block_ls, bcd_design, make_weights
from shiftdesign.graph import er_random_graph
from shiftdesign.netsim import run_rounds
from shiftdesign.tasks import consensus_matrix


def cases(rng):
    g20 = er_random_graph(20, 0.3, seed=7, require_connected=True)
    g200 = er_random_graph(200, 0.05, seed=1, require_connected=True)
    g1000 = er_random_graph(1000, 0.01, seed=1, require_connected=True)
    seq20 = ShiftSequence(g20, [rng.standard_normal(g20.n_edges) for _ in range(10)])
    seq200 = ShiftSequence(g200, [rng.standard_normal(g200.n_edges) / 10 for _ in range(10)])
    seq1000 = ShiftSequence(g1000, [rng.standard_normal(g1000.n_edges) / 10 for _ in range(10)])
    p20 = DesignProblem(consensus_matrix(20), g20, 10)
    p_small = DesignProblem(consensus_matrix(20), g20, 4, make_weights("linear", 4))
    z200, z1000 = rng.standard_normal(200), rng.standard_normal(1000)
    return {
        "assemble block 1 (N=20, L=10)": lambda b: assemble_block_ls(p20, seq20, 1, backend=b),
        "run_rounds (N=200, L=10)": lambda b: run_rounds(g200, seq200, z200, backend=b),
        "run_rounds (N=1000, L=10)": lambda b: run_rounds(g1000, seq1000, z1000, backend=b),
        "bcd_design (N=20, L=4, 5 sweeps)": lambda b: bcd_design(p_small, SolverConfig(i_max=5), backend=b),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = sorted(kernels.BACKENDS)
    print(f"backends: {', '.join(backends)} (active: {kernels.BACKEND})")
    print(f"{'case':38s}" + "".join(f"{b:>14s}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name, fn in cases(np.random.default_rng(0)).items():
        best = {}
        for b in backends:
            fn(b)
            best[b] = min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat))
        row = f"{name:38s}" + "".join(f"{best[b] * 1e3:12.2f}ms" for b in backends)
        if "compiled" in best:
            row += f"{best['python'] / best['compiled']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
