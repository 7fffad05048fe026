"""Base stations on a line: closed-form load laws against simulation."""

import numpy as np

from palmload import LoadIntegrand, SimConfig, line_laplace_no_interf, simulate_load_distribution
from palmload.line import line_closed_form_case

lam = 1.0
law = line_closed_form_case("constant", lam)
integ = LoadIntegrand.constant_density(1.0)
cfg = SimConfig(dimension="line", lam=lam, integrand=integ, n_samples=5000, seed=3, window_count=200)
s = simulate_load_distribution(cfg)

print("cell length: sum of two Exp(2 lambda)")
print(f"  mean  closed form {law.mean:.4f}   simulated {s.mean:.4f} +- {s.stderr:.4f}")
print(f"  var   closed form {law.variance:.4f}   simulated {np.var(s.loads, ddof=1):.4f}")
for t in (0.5, 1.0, 2.0):
    print(f"  P(load <= {t})  closed form {float(law.cdf(t)):.4f}   empirical {np.mean(s.loads <= t):.4f}")

print("\nLaplace transform of the load with f0 = 1 (exact (2/(2+s))^2)")
for sv in (0.5, 1.0, 2.0):
    v = line_laplace_no_interf(sv, lambda r: np.ones_like(np.asarray(r, dtype=float)), lam)
    print(f"  s={sv}: {v.real:.8f}   {(2 / (2 + sv)) ** 2:.8f}")
