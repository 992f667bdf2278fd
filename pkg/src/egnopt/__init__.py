"""Nonlinear-interference lookup tables and launch-power optimization
for coherent, dispersion-uncompensated WDM links.

The package discretizes the enhanced Gaussian-noise picture of fiber
nonlinearity into per-channel-pair coefficients, evaluates link budgets
from those tables, and solves convex power-allocation problems
(max-min SNR margin, max sum rate) in log-power variables.
"""

__version__ = "0.1.0"

from .budget import (LinkBudget, PowerAllocation, ase_power, ber_from_snr,
                     combine_with_input_snr, link_budget, margins, nli_power,
                     snr_from_ber, snrs, total_rate)
from .config import (AmplifierSpec, ChannelGrid, ConfigError, FiberParams,
                     ModulationSpec, SystemConfig, config_from_dict, load_config)
from .kernel import KernelContext, mu, phased_array_power
from .optimize import (BarrierSettings, Solution, margin_constraint_values,
                       objective_value_and_gradient, solve_flat, solve_max_rate,
                       solve_min_max_margin)
from .quadrature import QuadratureSpec, integrate
from .tables import (NliTableError, NliTables, TableCacheError, build_tables,
                     load_tables, save_tables, sci_coefficient, xci_coefficients)
from .units import (attenuation_to_field_loss, dbm_to_watt, dispersion_to_beta2,
                    excess_moments, watt_to_dbm)
