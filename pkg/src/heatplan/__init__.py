"""Heat-diffusion score fields and annealed Langevin multi-robot planning."""

from .errors import (
    DegenerateFieldError,
    DomainError,
    GenerationError,
    HeatplanError,
    MapFormatError,
    ParameterError,
    PlacementError,
    RenderError,
    SingularConfigurationError,
    UnknownLabelError,
)
from .gridmap import (
    FAMILIES,
    VOCABULARY,
    GeneratorParams,
    RobotSpec,
    Scenario,
    SemanticRegion,
    WorldMap,
    cell_center,
    decode_map,
    decode_scenario,
    empty_map,
    encode_map,
    encode_scenario,
    generate_map,
    is_free,
    load_map,
    load_scenario,
    resolve_goal_regions,
    save_map,
    save_scenario,
    world_to_cell,
)
from .heatfield import (
    FieldCache,
    HeatState,
    NoiseSchedule,
    ScoreField,
    SourceSpec,
    build_schedule,
    build_score_field,
    heat_step,
    init_heat,
    internal_dt,
    interpolate,
    interpolate_many,
    sample_heat,
    score_ascent_reaches,
    score_fields,
    solve_to_times,
    stability_limit,
)
from .planner import (
    JointState,
    PlannerConfig,
    PlanResult,
    Trajectory,
    interrobot_cost,
    interrobot_guidance,
    langevin_step,
    plan,
    result_to_dict,
    result_to_json,
    validate_plan,
)
from .bench import (
    SuiteReport,
    SuiteSpec,
    aggregate_records,
    bfs_path_length,
    flood_fill,
    generate_suite,
    run_one,
    run_suite,
    write_records,
    write_report,
)
from .render import LAYERS, ROBOT_COLORS, RenderSpec, canvas_transform, figure_name, render_svg

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
