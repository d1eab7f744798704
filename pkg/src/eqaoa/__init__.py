"""Evolutionary QAOA for Max-Cut on exact statevector simulators."""

__version__ = "0.1.0"

from .graph import (  # noqa: F401
    RegularGraph,
    GraphGenerationError,
    generate_regular,
    cut_value,
    cut_values,
    max_cut_bruteforce,
    read_graph,
    write_graph,
)
from .qsim import (  # noqa: F401
    StateVector,
    CostDiagonal,
    ShotHistogram,
    OpCounter,
    uniform_state,
    build_cost_diagonal,
    apply_cost_layer,
    apply_mixer_layer,
    run_qaoa,
    sample,
)
from .fitness import (  # noqa: F401
    FitnessConfig,
    EvaluationRecord,
    cvar_fitness,
    max_count_fitness,
    approximation_ratio,
    uniqueness_ratio,
    evaluate_angles,
)
from .evo import (  # noqa: F401
    Genotype,
    Individual,
    EvoConfig,
    GenerationStats,
    RunResult,
    init_population,
    sus_select,
    crossover,
    mutate,
    elitist_replace,
    evolve,
)
from .islands import (  # noqa: F401
    IslandState,
    MigrationEvent,
    ElitePacket,
    MultiRunResult,
    select_migrant,
    apply_immigrant,
    run_islands,
    resume_islands,
    checkpoint,
    restore,
)
from .baseline import (  # noqa: F401
    BaselineConfig,
    BaselineResult,
    ComparisonRecord,
    optimize_local,
    compare_arms,
)
