"""Quadratic differential operators: singular spaces, spectral inequalities,
dissipation and null-control synthesis at Galerkin scale."""
from .control import (ControlProblem, gramian, hum_control, lr_schedule, observability_check,
                      propagate, sharp_cost_bound)
from .errors import QuadObsError
from .hermite import (SpectralSubspaceFunction, bernstein_lhs, sample_subspace,
                      weighted_decay_norm, weyl_galerkin)
from .inequalities import (bound_besicovitch, bound_fractional, bound_gen, bound_hermite,
                           bound_kovrijkine, bound_decay_cubes, dissipation_experiment, gram_matrix,
                           smoothing_experiment, spectral_ineq_empirical)
from .sensors import (SensorSet, besicovitch_covering, cell_density, good_bad_split,
                      john_distortion, kc_select, lattice_covering, verify_decay)
from .symbols import (build_symbol, detect_product, hamilton_map, kalman_rank, ou_symbol,
                      singular_space)

__version__ = "0.1.0"
