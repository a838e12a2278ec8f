"""
Dissipation for the Kolmogorov operator: Galerkin versus exact
==============================================================

``A = d^2/dx2^2 + x2 d/dx1`` diffuses only in ``x2``; the transport term
rotates high frequencies into the diffused direction. The high-frequency
part should decay like ``exp(-c t^3 lambda)``.

Without a potential the semigroup is an explicit Fourier multiplier,
which gives the exact curve. The Hermite-Galerkin truncation struggles:
the comparison projector of ``-Laplacian`` is poorly represented.
"""
import numpy as np

from quadobs.hermite import weyl_galerkin
from quadobs.inequalities import dissipation_experiment, fourier_dissipation_experiment
from quadobs.symbols import kolmogorov_spec, ou_symbol

lam = 7.0
spec = kolmogorov_spec(1)
t = np.linspace(0.05, 0.5, 10)

exact = fourier_dissipation_experiment(spec, lam, k0=1, times=t)
A = weyl_galerkin(ou_symbol(spec), int(2 * lam + 10))
gal = dissipation_experiment(A, (), lam, times=t, enforce_leakage=False,
                             lam_sweep=[5, 6, 7, 8, 9])

print(f"{'t':>5} {'exact':>10} {'Galerkin':>10}")
for ti, e, g in zip(t, exact.decay, gal.decay):
    print(f"{ti:5.2f} {e:10.6f} {g:10.6f}")
print("t-exponent: exact %.3f, Galerkin %.3f (law: 3)" % (exact.exponent, gal.exponent))
print("Galerkin leakage %.2e" % gal.leakage)
