"""Independent high-precision oracle for the ergodic threshold of the built-in models.

Maximises the closed-form long-run yield 1/(S'(b) m((0,b))) with mpmath: a
2000-point grid search over (1/(2*gamma), 1/gamma) followed by golden-section
refinement. The printed values are frozen into the test suite.

    python scripts/oracle_ergodic.py
"""
import mpmath as mp

mp.mp.dps = 30


def log_yield(kind, mu, gamma, sigma, b):
    mu, gamma, sigma, b = (mp.mpf(v) for v in (mu, gamma, sigma, b))
    n = 2 * mu / sigma**2
    if kind == "verhulst_pearl":
        k = n * gamma
        # S'(b) m((0,b)) = b^-n e^{kb} (2/sigma^2) k^{-(n-1)} lowergamma(n-1, kb)
        log_sm = (-n * mp.log(b) + k * b + mp.log(2 / sigma**2)
                  - (n - 1) * mp.log(k) + mp.log(mp.gammainc(n - 1, 0, k * b)))
    else:
        z = gamma * b
        log_sm = (-n * mp.log(b / (1 - z)) + mp.log(2 / sigma**2)
                  + (1 - n) * mp.log(gamma)
                  + mp.log(mp.quad(lambda t: t**(n - 2) * (1 - t)**(-n - 2), [0, z / 2, z])))
    return -log_sm


def oracle(kind, mu, gamma, sigma, n_grid=2000):
    gamma = mp.mpf(gamma)
    lo, hi = 1 / (2 * gamma), 1 / gamma
    grid = [lo + (hi - lo) * (i + 1) / (n_grid + 1) for i in range(n_grid)]
    vals = [log_yield(kind, mu, gamma, sigma, b) for b in grid]
    i = max(range(n_grid), key=lambda j: vals[j])
    a, c = grid[max(i - 1, 0)], grid[min(i + 1, n_grid - 1)]
    phi = (mp.sqrt(5) - 1) / 2
    for _ in range(120):
        x1, x2 = c - phi * (c - a), a + phi * (c - a)
        if log_yield(kind, mu, gamma, sigma, x1) > log_yield(kind, mu, gamma, sigma, x2):
            c = x2
        else:
            a = x1
    b = (a + c) / 2
    return grid[i], b, mp.exp(log_yield(kind, mu, gamma, sigma, b))


if __name__ == "__main__":
    cases = [("verhulst_pearl", s) for s in ("0.02", "0.05", "0.1", "0.2")]
    cases += [("logistic", s) for s in ("0.05", "0.1")]
    for kind, s in cases:
        g, b, ell = oracle(kind, "0.1", "0.001", s)
        print(f"{kind:15s} sigma={s:5s} grid_b={mp.nstr(g, 12):>16s} "
              f"b*={mp.nstr(b, 15):>20s} ell*={mp.nstr(ell, 15)}")
