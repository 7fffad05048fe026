"""Mean and variance of elastic load on a planar network."""

import math

from palmload import (
    MarkModel,
    RateModel,
    build_integrand,
    elastic_low_sinr_bound,
    plane_mean_load,
    plane_second_moment,
    reference_elastic,
    reference_propagation,
)

marks = MarkModel()
print("eta  lambda  linear-rate mean   sd      low-SINR bound")
for eta in (2.5, 3.5, 4.0):
    prop = reference_propagation(eta)
    integ = build_integrand(reference_elastic(), RateModel("linear"), prop)
    for lam in (0.5, 1.0, 2.0):
        m1 = plane_mean_load(integ, lam, prop, marks)
        m2 = plane_second_moment(integ, lam, prop, marks)
        bound = elastic_low_sinr_bound(lam, 1e7, 1.0, 5e6, prop)
        print(f"{eta:3.1f}  {lam:6.1f}  {m1:16.4f}  {math.sqrt(max(m2 - m1 * m1, 0)):6.4f}  {bound:10.4f}")

print("\nShannon rate at eta = 3.5, lambda = 1, three ways to average over interference")
prop = reference_propagation(3.5)
integ = build_integrand(reference_elastic(), RateModel("shannon"), prop)
for strategy in ("mean_field", "gaussian_approx", "transform_inversion"):
    print(f"  {strategy:20s} {plane_mean_load(integ, 1.0, prop, marks, strategy):.4f}")
