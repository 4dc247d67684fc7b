"""Smoke test for the tsdiffusion_py extension.

Build and install first:
    pip install --no-build-isolation ./crates/python
"""

import math

import tsdiffusion_py as ts


def check(cond, msg):
    if not cond:
        raise SystemExit(f"FAIL: {msg}")
    print(f"ok   {msg}")


spec = ts.BanditSpec.mab([0.0, 1.0], 1.0)
check(spec.arms == 2 and len(spec.spec_hash) == 64, "spec construction and hash")
check(spec.validate(1000) == [], "valid spec has no violations")
check(ts.BanditSpec.mab([0.5, 1.0], 1.0).validate(1000) != [], "missing zero gap is reported")

g = ts.gamma_two_arm(spec, [0.5, 0.5], [0.0, 0.0])
check(abs(sum(g) - 1.0) < 1e-12, "two-arm kernel sums to one")
g3 = ts.gamma_k_arm(ts.BanditSpec.mab([0.0, 0.0, 0.0], 1.0), [0.3, 0.3, 0.3], [0.0, 0.0, 0.0])
check(all(abs(p - 1 / 3) < 1e-8 for p in g3), "symmetric three-arm kernel is uniform")

lin = ts.BanditSpec.linear([[1.0, 0.0], [0.0, 1.0]], [1.0, 0.0], 1.0)
lam = ts.lambda_linear(lin, [0.4, 0.6], [0.1, -0.2])
gam = ts.gamma_two_arm(spec, [0.4, 0.6], [0.1, -0.2])
check(max(abs(a - b) for a, b in zip(lam, gam)) < 1e-8, "orthonormal linear kernel reduces to MAB kernel")

est, se = ts.mc_oracle(spec, [0.5, 0.5], [0.0, 0.0], draws=200_000, seed=1)
check(abs(est[0] - g[0]) < 5 * se[0], "Monte Carlo oracle agrees with closed form")

paths = ts.simulate(spec, 500, 7)
occ = paths["occupation"]
check(abs(occ[0][-1] + occ[1][-1] - 1.0) < 1e-12, "finite-n occupation sums to one")
check(paths == ts.simulate(spec, 500, 7), "simulation is deterministic per seed")
r = ts.rescaled_regret(spec, 500, 7)
check(math.isclose(r, occ[1][-1]), "regret equals gap times occupation")

lp = ts.solve_sde(spec, 1e-3, 3)
check(len(lp["occupation"][0]) == 1001, "limit path has 1/h + 1 grid points")
ode = ts.solve_random_ode(spec, 1e-3, 3)
check(all(b >= a for a, b in zip(ode["occupation"][1], ode["occupation"][1][1:])), "random ODE occupation is nondecreasing")

check(ts.ks_statistic([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0, "KS of identical samples is zero")
check(ts.ks_statistic([0.0, 1.0], [5.0, 6.0]) == 1.0, "KS of disjoint samples is one")
check(abs(ts.quadratic_variation([0.0, 1.0]) - 1.0) < 1e-15, "quadratic variation of one step")

try:
    ts.solve_sde(spec, 0.5, 0)
except ValueError:
    print("ok   oversized step is rejected")
else:
    raise SystemExit("FAIL: oversized step accepted")

print("smoke test passed")
