"""Tools for two-player absorbing games with tail-measurable payoffs.

The package computes minmax values, classifies games through the
small-discount auxiliary-game pipeline, constructs epsilon-equilibrium
strategy machines and certifies them by exact evaluation and simulation.
"""

from .builder import EquilibriumProfile, build_equilibrium
from .game import (
    Buchi,
    CoBuchi,
    Constant,
    EvenStageLimsupAverage,
    GameSpec,
    LimsupAverage,
    LimsupStage,
    MixedAction,
    MixedProfile,
    RunPrefix,
    absorption_prob,
    conditional_absorbing_payoff,
    evaluate_run,
    stationary_payoff,
    validate_game,
)
from .machines import Phase, StatTestSpec, StrategyMachine, stationary_machine
from .pipeline import PipelineResult, run_pipeline
from .solvers import minmax_values
from .verify import (
    certify_epsilon_equilibrium,
    certify_punisher,
    exact_profile_value,
    monte_carlo,
)

__version__ = "0.1.0"
