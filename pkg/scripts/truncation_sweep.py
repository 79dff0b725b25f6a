"""Successive differences |c_i^{2N}(t) - c_i^N(t)| for a doubling sequence of N.

    python3 scripts/truncation_sweep.py --kernel constant --t 1 --n-list 16,32,64,128
"""

import argparse

from dged import IntegratorConfig, InitialSpec, builtin_kernel, truncation_convergence


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kernel", default="constant")
    ap.add_argument("--t", type=float, default=1.0)
    ap.add_argument("--n-list", default="16,32,64")
    ap.add_argument("--i-max", type=int, default=8)
    args = ap.parse_args()

    n_list = [int(x) for x in args.n_list.split(",")]
    cfg = IntegratorConfig(rtol=1e-12, atol=1e-15)
    tab = truncation_convergence(builtin_kernel(args.kernel), InitialSpec("monodisperse", n_list[0]),
                                 (args.t,), n_list, config=cfg)
    print("i  " + "  ".join(f"d(N={n})" .rjust(12) for n in n_list[1:]))
    for i in range(args.i_max + 1):
        print(f"{i:<2} " + "  ".join(f"{d:12.3e}" for d in tab.deltas(i, args.t)))
    for N, msg in tab.failures.items():
        print(f"N={N} failed: {msg}")


if __name__ == "__main__":
    main()
