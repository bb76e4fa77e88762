"""The instruments.py file defines the contract specs and results of the pricer."""
from enum import Enum
from typing import Any, Dict, Optional, Tuple

from pydantic import Field, model_validator

from .base import BaseModel, ConfigModel


class VarianceSpace(Enum):
    """An enumeration of the spaces realised variance accrues in."""

    LOGIT = "logit"
    PROBABILITY = "probability"

    @staticmethod
    def schema() -> Dict[str, Any]:
        """Get the schema for the variance space enum.

        Returns:
            Dict[str, Any]: The schema for the variance space enum.
        """
        return {"type": "string", "enum": [space.value for space in VarianceSpace]}


class Direction(Enum):
    """An enumeration of first-passage directions."""

    HIT_ABOVE = "hit-above"
    HIT_BELOW = "hit-below"

    @staticmethod
    def schema() -> Dict[str, Any]:
        """Get the schema for the direction enum.

        Returns:
            Dict[str, Any]: The schema for the direction enum.
        """
        return {"type": "string", "enum": [direction.value for direction in Direction]}


class PricingMethod(Enum):
    """An enumeration of the pricing methods."""

    CLOSED_FORM = "closed-form"
    PIDE = "pide"
    MC = "mc"

    @staticmethod
    def schema() -> Dict[str, Any]:
        """Get the schema for the pricing method enum.

        Returns:
            Dict[str, Any]: The schema for the pricing method enum.
        """
        return {"type": "string", "enum": [method.value for method in PricingMethod]}


class PayoffKind(Enum):
    """An enumeration of the payoffs the PIDE and Monte Carlo pricers understand."""

    VANILLA = "vanilla"
    DIGITAL = "digital"
    CONSTANT = "constant"
    VARIANCE = "variance"
    CORRIDOR = "corridor"
    VOL_SWAP = "vol-swap"
    FIRST_PASSAGE = "first-passage"

    @staticmethod
    def schema() -> Dict[str, Any]:
        """Get the schema for the payoff kind enum.

        Returns:
            Dict[str, Any]: The schema for the payoff kind enum.
        """
        return {"type": "string", "enum": [kind.value for kind in PayoffKind]}


class FirstPassageSpec(BaseModel):
    """The FirstPassageSpec class defines a first-passage note.

    Attributes:
        level (float): Probability level h.
        t0 (float): Start of monitoring in seconds.
        T (float): Expiry in seconds.
        direction (Direction): Hit above or below the level.
        payout (float): Amount paid at the hit.
    """

    level: float
    t0: float = 0.0
    T: float
    direction: Direction = Direction.HIT_ABOVE
    payout: float = 1.0

    @model_validator(mode="after")
    def _check_spec(self) -> "FirstPassageSpec":
        if not 0.0 < self.level < 1.0:
            raise ValueError(f"level must lie in (0, 1), got {self.level}")
        if self.T <= self.t0:
            raise ValueError(f"T must exceed t0, got t0={self.t0}, T={self.T}")
        return self


class PIDEGrid(BaseModel):
    """The PIDEGrid class defines the space-time grid of the PIDE solver.

    Attributes:
        x_min (float): Lower logit bound.
        x_max (float): Upper logit bound.
        n_x (int): Space nodes.
        n_t (int): Time steps.
        theta (float): Implicit weight of the diffusion/advection step.
    """

    x_min: float
    x_max: float
    n_x: int = 256
    n_t: int = 128
    theta: float = 1.0

    @model_validator(mode="after")
    def _check_grid(self) -> "PIDEGrid":
        if self.x_min >= self.x_max:
            raise ValueError("x_min must be below x_max")
        if self.n_x < 64 or self.n_t < 32:
            raise ValueError(f"the PIDE grid needs n_x >= 64 and n_t >= 32, got {self.n_x}, {self.n_t}")
        if not 0.5 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0.5, 1]")
        return self

    @property
    def dx(self) -> float:
        """Space step."""
        return (self.x_max - self.x_min) / (self.n_x - 1)

    def halved(self) -> "PIDEGrid":
        """The half-resolution grid used for the Richardson error estimate."""
        return self.model_copy(update={"n_x": (self.n_x - 1) // 2 + 1, "n_t": self.n_t // 2})


class PayoffSpec(ConfigModel):
    """The PayoffSpec class defines one instrument to price.

    Attributes:
        name (str): Label used in the outputs.
        kind (PayoffKind): Payoff family.
        strike_x (float): Logit strike of the digital payoff.
        space (VarianceSpace): Space of variance, corridor and vol-swap payoffs.
        corridor (Tuple[float, float]): Probability band of the corridor payoff.
        level (float): Barrier level of the first-passage payoff.
        direction (Direction): Barrier direction of the first-passage payoff.
        payout (float): Amount of the first-passage payoff.
        methods (Tuple[PricingMethod, ...]): Methods to price with.
    """

    name: str
    kind: PayoffKind
    strike_x: float = 0.0
    space: VarianceSpace = VarianceSpace.LOGIT
    corridor: Optional[Tuple[float, float]] = None
    level: Optional[float] = None
    direction: Direction = Direction.HIT_ABOVE
    payout: float = 1.0
    methods: Tuple[PricingMethod, ...] = (PricingMethod.PIDE, PricingMethod.MC)

    @model_validator(mode="after")
    def _check_payoff(self) -> "PayoffSpec":
        if self.kind is PayoffKind.CORRIDOR and self.corridor is None:
            raise ValueError(f"{self.name}: corridor payoffs need a corridor")
        if self.kind is PayoffKind.FIRST_PASSAGE and self.level is None:
            raise ValueError(f"{self.name}: first-passage payoffs need a level")
        if self.corridor is not None and not 0.0 < self.corridor[0] < self.corridor[1] < 1.0:
            raise ValueError(f"{self.name}: corridor must satisfy 0 < a < b < 1")
        return self

    def barrier(self, t0: float, T: float) -> Optional[FirstPassageSpec]:
        """First-passage spec of the payoff, if it has one."""
        if self.kind is not PayoffKind.FIRST_PASSAGE:
            return None
        return FirstPassageSpec(level=self.level, t0=t0, T=T, direction=self.direction, payout=self.payout)


class PriceResult(BaseModel):
    """The PriceResult class defines a price with its error estimate.

    Attributes:
        value (float): Price.
        error (float): Grid-convergence estimate or Monte Carlo standard error.
        method (PricingMethod): Method that produced the price.
        label (str): Convention note, for example the correlation-strike definition.
        details (Dict[str, Any]): Method-specific extras.
    """

    value: float
    error: float = 0.0
    method: PricingMethod
    label: Optional[str] = None
    details: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_error(self) -> "PriceResult":
        if not self.error >= 0.0:
            raise ValueError(f"price error must be nonnegative, got {self.error}")
        return self


class GreekBumps(ConfigModel):
    """The GreekBumps class defines finite-difference bump sizes.

    Attributes:
        x (float): Absolute bump of the logit state.
        sigma_rel (float): Relative bump of the belief volatility.
        rho (float): Absolute bump of the correlation.
        jump_var_rel (float): Relative bump of the jump second moment.
    """

    x: float = 0.01
    sigma_rel: float = 0.01
    rho: float = 0.01
    jump_var_rel: float = 0.01


class Greeks(BaseModel):
    """The Greeks class defines the logit-domain sensitivities of a price.

    Attributes:
        delta_x (float): dV/dx.
        gamma_x (float): d2V/dx2.
        vega_b (float): dV/dsigma_b per unit of sigma_b.
        vega_rho (float): dV/drho, when the instrument depends on a correlation.
        jump_vega (float): dV/dsJ2 at fixed intensity.
    """

    delta_x: float
    gamma_x: float
    vega_b: float
    vega_rho: Optional[float] = None
    jump_vega: float
