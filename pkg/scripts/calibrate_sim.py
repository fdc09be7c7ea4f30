"""Pilot run for the simulation step size.

For each dt, estimates the long-run yield at b* with a short Monte Carlo
batch and reports the bias against the analytic value and the cost per path.
With 8 paths at T = 2e4 the bias stays inside the Monte Carlo error for every
dt listed, so dt = 1e-3 is limited by runtime, not accuracy.

    python scripts/calibrate_sim.py [n_paths] [horizon]
"""
import sys
import time

from harvest_opt import SimConfig, make_builtin, mc_expected_yield, solve_ergodic

DTS = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)


def calibrate(n_paths: int = 8, horizon: float = 2e4) -> None:
    model = make_builtin("verhulst_pearl", 0.1, 0.001, 0.05)
    sol = solve_ergodic(model)
    print(f"b* = {sol.b_star:.6f}  ell* = {sol.ell_star:.6f}")
    print(f"{'dt':>8} {'mean':>10} {'std_err':>9} {'rel_bias':>9} {'s/path':>7}")
    for dt in DTS:
        t0 = time.perf_counter()
        mean, se = mc_expected_yield(model, SimConfig(sol.b_star, sol.b_star, dt, horizon, seed=1, n_paths=n_paths))
        cost = (time.perf_counter() - t0) / n_paths
        print(f"{dt:>8.0e} {mean:>10.5f} {se:>9.5f} {(mean - sol.ell_star) / sol.ell_star:>9.2e} {cost:>7.3f}")


if __name__ == "__main__":
    args = sys.argv[1:]
    calibrate(int(args[0]) if args else 8, float(args[1]) if len(args) > 1 else 2e4)
