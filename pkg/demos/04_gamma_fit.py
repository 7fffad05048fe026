"""A Gamma law fitted by moments describes the simulated load well."""

from palmload import RateModel, SimConfig, fit_gamma_moments, qq_points, reference_elastic, reference_propagation, simulate_load_distribution
from palmload.simulator import qq_correlation

cfg = SimConfig(
    prop=reference_propagation(3.5),
    traffic=reference_elastic(),
    rate=RateModel("shannon"),
    n_samples=1500,
    seed=4,
    angular_nodes=128,
    radial_nodes=16,
)
s = simulate_load_distribution(cfg)
fit = fit_gamma_moments(s)
print(f"mean {s.mean:.4f} +- {s.stderr:.4f}; Gamma shape k = {fit.k:.3f}, scale = {fit.theta:.4f}")
print(f"Q-Q correlation over the 1%..99% quantiles: {qq_correlation(s, fit):.5f}")
levels, emp, gam = qq_points(s, fit, 9)
print("\nlevel  empirical  gamma")
for q, e, g in zip(levels, emp, gam):
    print(f"{q:5.2f}  {e:9.4f}  {g:6.4f}")
