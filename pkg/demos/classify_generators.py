"""
Singular spaces of quadratic generators
=======================================

Which directions does a quadratic semigroup fail to smooth? The singular
space answers that, and for axis-aligned cases it splits the coordinates
into an oscillator part ``I`` and a diffusive part ``J``.
"""
import numpy as np

from quadobs.symbols import (build_symbol, kalman_rank, kfp_spec, kolmogorov_spec,
                             oscillator_symbol, ou_symbol, singular_space)

# harmonic oscillator: smooths and confines everywhere
rep = singular_space(oscillator_symbol(1, (0,), (0,)))
print("harmonic oscillator  dim S =", rep.basis.shape[1], " k0 =", rep.k0)

# heat equation: no confinement in x
rep = singular_space(build_symbol(1, {((0,), (2,)): -1}))
print("heat                 dim S =", rep.basis.shape[1], " I =", rep.product.I)

# Kolmogorov: diffusion only in x2, transport x2 d/dx1 spreads it to x1
spec = kolmogorov_spec(1)
rep = singular_space(ou_symbol(spec))
print("Kolmogorov           k0 =", rep.k0, " Kalman rank =", kalman_rank(spec.Q, spec.B),
      " J =", rep.product.J)

# Kramers-Fokker-Planck with a confining potential in the first position
spec = kfp_spec(2, (0,))
rep = singular_space(ou_symbol(spec))
print("KFP, confined x1     I =", rep.product.I, " chain dims =", rep.chain_dims)

# the projector onto S, for the record
np.set_printoptions(precision=3, suppress=True)
print(rep.projector())
