"""Run-wide knobs shared by every algorithm module."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction

from .derand import DEFAULT_CAP, EngineOptions
from .errors import InvalidParams
from .graph import parse_delta
from .hashing import DEFAULT_FIELD_FLOOR, auto_field_size, is_prime
from .mpc import DEFAULT_CHARGES, ClusterState, MachineSpec


@dataclass(frozen=True)
class RunConfig:
    delta: Fraction = Fraction(1, 8)
    space: int = 1 << 16
    machines: int | None = None
    zeta: Fraction = Fraction(1, 2)
    k_select: int = 2
    k_conc: int = 4
    field_p: int | None = None  # None: smallest prime above the label range and the floor
    field_floor: int = DEFAULT_FIELD_FLOOR
    cap: int = DEFAULT_CAP
    work_cap: int = 1 << 28
    workers: int = 1
    sequence_budget: int = 1 << 20
    line_cap: int = 1 << 20
    strict_invariants: bool = False  # raise InvariantViolated instead of recording final-bound failures
    search_budget: int = 8  # admissible second-to-last chunk values tried when steering toward the invariants
    color_bins: int | None = None  # None: max(2, ceil(n^(3 delta))), raised past the reserve if needed
    color_reserve: int | None = None  # None: max(1, ceil(n^delta))
    charges: dict = field(default_factory=lambda: dict(DEFAULT_CHARGES))

    def __post_init__(self):
        object.__setattr__(self, "delta", parse_delta(self.delta))
        object.__setattr__(self, "zeta", Fraction(self.zeta))
        if not 0 <= self.zeta < 1:
            raise InvalidParams("zeta must lie in [0, 1)")
        if self.k_select < 1 or self.k_conc < 2:
            raise InvalidParams("need k_select >= 1 and k_conc >= 2")
        if self.field_p is not None and not is_prime(self.field_p):
            raise InvalidParams(f"field size {self.field_p} is not prime")
        if self.color_reserve is not None and self.color_reserve < 1:
            raise InvalidParams("color_reserve must be at least 1")
        if self.color_bins is not None and self.color_reserve is not None and self.color_reserve >= self.color_bins:
            raise InvalidParams(f"color_reserve {self.color_reserve} must be below color_bins {self.color_bins}")
        if self.space < 1 or self.workers < 1:
            raise InvalidParams("space and workers must be positive")

    @property
    def k(self) -> int:
        """1/delta."""
        return self.delta.denominator

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **kw)

    def engine(self) -> EngineOptions:
        return EngineOptions(cap=self.cap, workers=self.workers, work_cap=self.work_cap)

    def machine_spec(self) -> MachineSpec:
        return MachineSpec(self.space, self.machines)

    def new_cluster(self) -> ClusterState:
        return ClusterState(self.machine_spec(), dict(self.charges))

    def field_for(self, points: int) -> int:
        """Prime field holding points 1..points (labels are shifted by one)."""
        if self.field_p is not None:
            if self.field_p <= points:
                raise InvalidParams(f"field size {self.field_p} too small for {points} labels")
            return self.field_p
        return auto_field_size(points + 1, self.field_floor)
