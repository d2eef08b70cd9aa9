"""Exception types shared across the package."""


class AbgamesError(Exception):
    """Base class for all package errors."""


class SchemaViolation(AbgamesError):
    """Game or report file violates the JSON schema; carries located messages."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class GameValidationError(AbgamesError):
    """Raised by validate_game; carries the list of violations."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NonAbsorbingProfile(AbgamesError):
    """Conditional absorbing payoff requested for a profile that never absorbs."""


class UnsupportedExactEvaluation(AbgamesError):
    """Tail payoff has no exact closed form under the requested play."""


class EmptyWindow(AbgamesError):
    """Run-prefix window contains no applicable stages."""


class UnsupportedPayoffForMinmax(AbgamesError):
    """Minmax requested for a payoff variant with no declared value and no solver."""


class NoEquilibriumFound(AbgamesError):
    """Support enumeration exhausted without a stationary discounted equilibrium."""


class NoStableCluster(AbgamesError):
    """Discounted-equilibrium trace does not settle near the smallest discounts."""


class NoCaseMatched(AbgamesError):
    """Limit profile fits none of the three construction cases; solver inconsistency."""


class SandwichViolation(AbgamesError):
    """Auxiliary-game value left the [v - eps, v] band by more than tolerance."""


class InfeasibleEta(AbgamesError):
    """No absorption-budget eta satisfies the on-path payoff inequality."""


class DeltaTooLarge(AbgamesError):
    """Halving search on the absorbing-action weight hit its floor uncertified."""


class KappaOutOfRange(AbgamesError):
    """Frequency-test threshold left (0, 1); block length too short for the budget."""


class PunisherNotCertified(AbgamesError):
    """No candidate punisher held the opponent near her minmax value."""


class WitnessInvalid(AbgamesError):
    """Classification witness failed re-verification at build time."""


class StateCapExceeded(AbgamesError):
    """Joint machine chain needs more states than the configured cap."""


class SizeCapExceeded(AbgamesError):
    """Matrix or polytope dimensions above the supported bound."""


class InternalInconsistency(AbgamesError):
    """Cross-checks disagree; indicates a bug rather than bad input."""
