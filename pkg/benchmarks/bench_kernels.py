"""Time the numba kernels against the numpy fallback.

Each backend runs in its own interpreter, since the choice is fixed at
import time by ``ISING_LAB_DISABLE_NUMBA``. The numba figures exclude the
first (compiling) call.

    python3 benchmarks/bench_kernels.py [--L 64] [--sweeps 50]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from isinglab import kernels
from isinglab.lattice import Couplings, build_lattice
from isinglab.mc import Sampler

L, sweeps = int(sys.argv[1]), int(sys.argv[2])
out = {"backend": kernels.BACKEND}


def timed(fn, reps):
    fn()  # warm-up, compiles under numba
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) / reps


lat = build_lattice(2, L, "torus")
for alg in ("sw", "glauber"):
    s = Sampler(lat, Couplings(0.44), algorithm=alg)
    st = s.init_state(0, 0)
    out[alg + "_sweep"] = timed(lambda: s.sweep(st), sweeps)
    out[alg + "_checksum"] = int(st.spins.sum())

small = build_lattice(2, (4, 4))
J = np.ones(small.n_edges)
h = np.zeros(small.n_vertices)
out["log_weights_2^16"] = timed(
    lambda: kernels.log_weights(small.n_vertices, small.eu, small.ev, J, h, 0.4, 0,
                                1 << small.n_vertices), 5)
print(json.dumps(out))
"""


def run(disable: bool, L: int, sweeps: int) -> dict:
    env = dict(os.environ, ISING_LAB_DISABLE_NUMBA="1" if disable else "0")
    p = subprocess.run([sys.executable, "-c", WORKER, str(L), str(sweeps)], env=env,
                       capture_output=True, text=True, check=True)
    return json.loads(p.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=int, default=64)
    ap.add_argument("--sweeps", type=int, default=50)
    args = ap.parse_args()
    fast = run(False, args.L, args.sweeps)
    slow = run(True, args.L, args.sweeps)
    print(f"{'kernel':<20}{fast['backend']:>12}{slow['backend']:>12}{'speedup':>10}")
    for key in ("sw_sweep", "glauber_sweep", "log_weights_2^16"):
        a, b = fast[key], slow[key]
        print(f"{key:<20}{a * 1e3:>10.3f}ms{b * 1e3:>10.3f}ms{b / a:>9.1f}x")
    same = all(fast[k] == slow[k] for k in ("sw_checksum", "glauber_checksum"))
    print(f"seeded chains identical across backends: {same}")


if __name__ == "__main__":
    main()
