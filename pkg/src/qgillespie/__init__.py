"""Quantum jump trajectories of Lindblad master equations by Gillespie sampling.

Waiting times between detector clicks are drawn from tabulated waiting-time
distributions, so a trajectory costs one table lookup per jump regardless of
how long the system stays quiet. A fixed-step Monte Carlo wavefunction solver
and an exact master-equation integrator are included as references.

Typical use::

    from qgillespie import build_resonant_fluorescence, auto_tables, run_ensemble

    model = build_resonant_fluorescence(delta=0.0, omega=0.5, gamma=0.5)
    tables = auto_tables(model)
    trajectories = run_ensemble(model, tables, 0, t_f=200.0, n_traj=100, base_seed=1)
"""

from __future__ import annotations

__version__ = "0.1.0"

from .analysis import (
    ObservableTrace,
    WtdHistogram,
    ensemble_average,
    histogram_from_waits,
    jump_expectations,
    observable_trace,
    pooled_waits,
    total_variation,
    trace_distance,
    wtd_histogram,
)
from .config import RunConfig, load_config, parse_config
from .engine import (
    JumpRecord,
    RngStream,
    Trajectory,
    apply_jump,
    evolve_nojump,
    replay_trajectory,
    run_ensemble,
    run_trajectory,
    run_trajectory_pure,
    sample_channel,
    sample_waiting_time,
)
from .errors import (
    AllZeroWeights,
    ConfigError,
    DegenerateSteadyState,
    DimensionError,
    GapExceedsTable,
    InvalidStateError,
    ModelError,
    NoJumps,
    ParseError,
    PartialMonitoringUnsupported,
    QGillespieError,
    TableError,
    TailMassTooLarge,
    VanishingTrace,
    ZeroJumpProbability,
)
from .filling import FilledTrajectory, coarse_propagate, fill_states
from .mcw import McwConfig, McwResult, master_equation_evolve, mcw_ensemble, mcw_trajectory, steady_state
from .models import (
    LindbladModel,
    annihilation,
    as_density,
    as_pure,
    build_charge_qubit,
    build_classical_rate_model,
    build_double_qubit,
    build_from_name,
    build_kerr,
    build_resonant_fluorescence,
    check,
    effective_hamiltonian,
    jump_rate_operator,
    validate,
)
from .precompute import (
    PrecomputedTables,
    PureTables,
    TimeGrid,
    auto_grid,
    auto_tables,
    build_liouvillian,
    build_nojump_superoperator,
    build_pure_tables,
    build_tables,
    cached_tables,
    load_tables,
    save_tables,
    wtd_weights,
)
