"""V(c(t)) and its rate along a run started away from equilibrium, compared
with the detailed-balance state of the same mass.

    python3 scripts/lyapunov_decay.py --N 16 --t-end 5
"""

import argparse

import numpy as np

from dged import ConcentrationState, IntegratorConfig, builtin_kernel, equilibrium_from_mass, integrate
from dged.analysis import lyapunov_rate, lyapunov_v
from dged.state import moment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kernel", default="constant")
    ap.add_argument("--N", type=int, default=16)
    ap.add_argument("--t-end", type=float, default=5.0)
    args = ap.parse_args()

    kernel = builtin_kernel(args.kernel)
    O = np.ones(args.N + 1)
    c0 = ConcentrationState(0.5 ** np.arange(args.N + 1) + 0.05)
    traj = integrate(kernel, c0, IntegratorConfig(sample_times=tuple(np.linspace(0, args.t_end, 11))),
                     lyapunov=lambda s: lyapunov_v(s, O))
    print(f"{'t':>6} {'V':>20} {'dV/dt':>12}")
    for s in traj.samples:
        r = lyapunov_rate(kernel, s.state, O)
        print(f"{s.state.time:6.2f} {s.moments.lyapunov:20.14f} {r.value:12.3e}")

    # the isolated run conserves the number of clusters including voids, so the
    # equilibrium it approaches is not the O_0 = 1 member of the family
    eq = equilibrium_from_mass(O, args.N, moment(c0, 1))
    print(f"O_0 = 1 equilibrium at the same mass: z = {eq.z:.6f}, V = {lyapunov_v(eq.values, O):.10f}")


if __name__ == "__main__":
    main()
