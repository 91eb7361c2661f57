from erl.transfer.composition import (
    CompositionFunction,
    CompositionKind,
    CompositionPrior,
    CompositionSpec,
    CustomTable,
    compose,
    composed_task,
    composition_prior,
    composition_spec_from_dict,
    divergence_correction_reward,
    load_composition_spec,
    require_reward_varying,
    zero_shot,
)
from erl.transfer.corrective import (
    IDENTITY_TOLERANCE,
    CorrectionKind,
    CorrectiveProblem,
    check_identity,
    combine,
    corrective_prior,
    dynamics_change_corrective,
    free_solution_reward,
    prior_change,
    require_solved,
    reward_change_corrective,
)
from erl.transfer.offline import (
    LearningRateSchedule,
    OfflineMode,
    TransitionBatch,
    exhaustive_batch,
    fit_offline,
    offline_k_update,
    sample_batch,
)

__all__ = [
    "CompositionFunction",
    "CompositionKind",
    "CompositionPrior",
    "CompositionSpec",
    "CustomTable",
    "compose",
    "composed_task",
    "composition_prior",
    "composition_spec_from_dict",
    "divergence_correction_reward",
    "load_composition_spec",
    "require_reward_varying",
    "zero_shot",
    "IDENTITY_TOLERANCE",
    "CorrectionKind",
    "CorrectiveProblem",
    "check_identity",
    "combine",
    "corrective_prior",
    "dynamics_change_corrective",
    "free_solution_reward",
    "prior_change",
    "require_solved",
    "reward_change_corrective",
    "LearningRateSchedule",
    "OfflineMode",
    "TransitionBatch",
    "exhaustive_batch",
    "fit_offline",
    "offline_k_update",
    "sample_batch",
]
