"""Loss-averaged quantum Fisher information for two-mode bosonic sensors."""

from .fock import (
    CollectiveOperator,
    LossOutcome,
    PureState,
    SectorChangingOperator,
    annihilator,
    apply_loss,
    apply_loss_sequence,
    coherent_state,
    collective_operator,
    dicke_state,
    evolve,
    fidelity,
    fubini_study_distance,
    ghz_state,
    random_state,
)
from .mpinv import mp_ghz_qfi_closed_form, mp_inverse_annihilator, mp_inverse_svd, mp_lift
from .qfi import (
    LossModel,
    MomentDiagnostic,
    ScalingFit,
    SectoredMixedState,
    f1,
    f2_dual,
    f2_single,
    fit_scaling,
    lower_bound_n32,
    moment_diagnostic,
    noisy_hl,
    noisy_sql,
    qfi_mixed,
    qfi_pure,
)
from .twisting import TwistingParams, optimize_twisting, twisted_state

__version__ = "0.1.0"
