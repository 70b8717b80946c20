"""Langevin dynamics, landscape and spectral-gap toolkit for the spherical p-spin glass."""

__version__ = "0.1.0"

from .model import (CouplingTensor, ModelSpec, energy, energy_many,
                    euclidean_gradient, overlap, read_tensor, sample_disorder,
                    spherical_gradient, spherical_hessian_apply, write_tensor,
                    zero_tensor)
from .sets import RegionSpec, contains, region_volume, sample_uniform_region
from .dynamics import (IntegratorConfig, Trajectory, langevin_step, mala_step,
                       run_chain, tune_dt)
from .spectral import (GAP_CONVENTION, CoordinateFunction, GapEstimate,
                       autocorrelation_time, conductance_test_function,
                       conductance_upper_bound, eta, exact_gap_circle,
                       rayleigh_upper_bound)
from .landscape import (Minimum, MinimaCatalog, catalog_minima,
                        find_local_minimum, ground_state_scale, m_n, theta)
from .freenergy import (FreeEnergyEstimate, band_profile,
                        concentration_experiment, gibbs_ratio_experiment,
                        restricted_free_energy)
from .certificates import (Certificate, HessianExtremes,
                           bakry_emery_certificate, hessian_extremes,
                           poincare_stability_certificate)

__all__ = [name for name in dir() if not name.startswith("_")]
