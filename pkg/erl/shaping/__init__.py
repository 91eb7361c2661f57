from erl.shaping.inverse import defeats_identifiability, identifiability_residual, inverse_reward
from erl.shaping.potential import (
    Potential,
    ShapedTask,
    ShapingIdentityReport,
    evaluate_shaped_policy_identity,
    load_potential,
    potential_from_solution,
    save_potential,
    shape,
    unshape_solution,
    unshape_task,
)

__all__ = [
    "Potential",
    "ShapedTask",
    "ShapingIdentityReport",
    "defeats_identifiability",
    "evaluate_shaped_policy_identity",
    "identifiability_residual",
    "inverse_reward",
    "load_potential",
    "potential_from_solution",
    "save_potential",
    "shape",
    "unshape_solution",
    "unshape_task",
]
