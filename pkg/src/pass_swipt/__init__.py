"""Rate-energy trade-off tools for pinching-antenna SWIPT downlinks."""

from .baselines import (
    FixedArray,
    con1_solve,
    con2_rate_upper_bound,
    con2_solve,
    fixed_array_positions,
)
from .config import (
    RunConfig,
    default_rho_grid,
    eps_grid_from_ceiling,
    load_config,
    load_scenario,
)
from .fdma import fdma_solve
from .model import (
    ConfigurationError,
    PaLayout,
    Scenario,
    SystemParams,
    UserPos,
    dbm_to_watts,
    effective_gain,
    effective_gains,
    eu_power_single,
    iu_rate_single,
    uniform_layout,
    watts_to_dbm,
)
from .noma import noma_solve
from .pso import PsoConfig, compute_e_max
from .results import AllocationResult, pareto_filter, revalidate
from .single_pair import two_stage
from .sweep import (
    ParetoPoint,
    SweepResult,
    harvest_ceiling,
    read_csv,
    sweep_run,
    write_csv,
)
from .tdma import tdma_solve

__all__ = [
    "AllocationResult",
    "ConfigurationError",
    "FixedArray",
    "PaLayout",
    "ParetoPoint",
    "PsoConfig",
    "RunConfig",
    "Scenario",
    "SweepResult",
    "SystemParams",
    "UserPos",
    "compute_e_max",
    "con1_solve",
    "con2_rate_upper_bound",
    "con2_solve",
    "dbm_to_watts",
    "default_rho_grid",
    "effective_gain",
    "effective_gains",
    "eps_grid_from_ceiling",
    "eu_power_single",
    "fdma_solve",
    "fixed_array_positions",
    "harvest_ceiling",
    "iu_rate_single",
    "load_config",
    "load_scenario",
    "noma_solve",
    "pareto_filter",
    "read_csv",
    "revalidate",
    "sweep_run",
    "tdma_solve",
    "two_stage",
    "uniform_layout",
    "watts_to_dbm",
    "write_csv",
]

__version__ = "0.1.0"
