"""Domain model: network, fleet, penalties, reserves, timescales.

All objects are plain frozen dataclasses, immutable after construction and
safe to share.  ``validate_case`` is the single gatekeeper: a case that
passes is accepted by every formulation builder without further checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InputError

GEN_KINDS = ("conventional_DA", "conventional_ST", "solar", "wind")

# reserve levels: (uc_fraction, ed_fraction) of bus load
RESERVE_LEVELS = {
    "very_low": (0.05, 0.0125),
    "low": (0.10, 0.025),
    "med": (0.15, 0.05),
    "high": (0.20, 0.10),
}

SW_LEVELS = {"low": 1.0, "med": 2.0, "high": 3.0}


@dataclass(frozen=True)
class Bus:
    id: str
    theta_min: float = -0.6          # rad
    theta_max: float = 0.6           # rad
    demand_ref: str | None = None    # demand series column


@dataclass(frozen=True)
class Line:
    from_bus: str
    to_bus: str
    susceptance: float               # per unit
    flow_max: float                  # MW
    flow_min: float | None = None    # MW; defaults to -flow_max

    def __post_init__(self):
        if self.flow_min is None:
            object.__setattr__(self, "flow_min", -self.flow_max)

    @property
    def id(self):
        return f"{self.from_bus}->{self.to_bus}"


@dataclass(frozen=True)
class Generator:
    id: str
    bus: str
    kind: str                        # one of GEN_KINDS
    g_min: float = 0.0               # MW
    g_max: float = 0.0               # MW
    ramp_up: float = 0.0             # MW per period
    ramp_down: float = 0.0           # MW per period
    min_up: int = 1                  # periods
    min_down: int = 1                # periods
    cost_startup: float = 0.0        # $ per start event
    cost_noload: float = 0.0         # $/h while committed
    cost_variable: float = 0.0       # $/MWh
    heat_rate: float = 0.0           # MMBtu/MWh
    co2_rate: float = 0.0            # ton/MWh
    nox_rate: float = 0.0            # lb/MWh
    so2_rate: float = 0.0            # lb/MWh
    supply_ref: str | None = None    # availability series column (renewables)

    @property
    def is_renewable(self):
        return self.kind in ("solar", "wind")

    @property
    def is_conventional(self):
        return self.kind in ("conventional_DA", "conventional_ST")

    @property
    def fast_start(self):
        return self.kind == "conventional_ST"


@dataclass(frozen=True)
class PenaltyConfig:
    phi_over: float = 25.0           # $/MWh conventional over-generation
    phi_curtail: float = 25.0        # $/MWh renewable curtailment
    phi_unmet: float = 5000.0        # $/MWh load shedding


@dataclass(frozen=True)
class ReservePolicy:
    uc_fraction: float               # of bus load, DA and ST layers
    ed_fraction: float               # of bus load, RT layer

    @classmethod
    def named(cls, level):
        try:
            return cls(*RESERVE_LEVELS[level])
        except KeyError:
            raise InputError(f"unknown reserve level {level!r}; "
                             f"choose from {sorted(RESERVE_LEVELS)}") from None


@dataclass(frozen=True)
class LayerTimescale:
    horizon: int                     # minutes
    resolution: int                  # minutes
    solve_frequency: int             # minutes

    @property
    def n_periods(self):
        return self.horizon // self.resolution


@dataclass(frozen=True)
class TimescaleConfig:
    da: LayerTimescale = field(default_factory=lambda: LayerTimescale(1440, 60, 1440))
    st: LayerTimescale = field(default_factory=lambda: LayerTimescale(240, 15, 180))
    rt: LayerTimescale = field(default_factory=lambda: LayerTimescale(75, 15, 15))

    def layer(self, name):
        return {"DA": self.da, "ST": self.st, "RT": self.rt}[name]


@dataclass(frozen=True)
class GridCase:
    buses: tuple
    lines: tuple
    generators: tuple
    penalties: PenaltyConfig = field(default_factory=PenaltyConfig)
    reserve: ReservePolicy = field(default_factory=lambda: ReservePolicy.named("very_low"))
    timescales: TimescaleConfig = field(default_factory=TimescaleConfig)
    sw_multiplier: float = 1.0       # scales solar/wind series only

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "generators", tuple(self.generators))

    def bus(self, bus_id):
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise InputError(f"unknown bus {bus_id!r}")

    def generators_at(self, bus_id):
        return [g for g in self.generators if g.bus == bus_id]


@dataclass
class ValidationReport:
    failures: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.failures

    def add(self, message):
        self.failures.append(message)

    def __str__(self):
        return "ok" if self.ok else "; ".join(self.failures)


def validate_case(case):
    """Check every structural invariant; failures carry their location."""
    rep = ValidationReport()
    bus_ids = [b.id for b in case.buses]
    seen = set()
    for b in case.buses:
        if b.id in seen:
            rep.add(f"duplicate bus id {b.id!r}")
        seen.add(b.id)
        if b.theta_min > b.theta_max:
            rep.add(f"bus {b.id!r}: theta_min > theta_max")
    bus_set = set(bus_ids)

    for ln in case.lines:
        if ln.from_bus not in bus_set or ln.to_bus not in bus_set:
            rep.add(f"line {ln.id!r}: dangling bus reference")
        if ln.from_bus == ln.to_bus:
            rep.add(f"line {ln.id!r}: self-loop")
        if ln.susceptance <= 0:
            rep.add(f"line {ln.id!r}: susceptance must be > 0")
        if ln.flow_min > ln.flow_max:
            rep.add(f"line {ln.id!r}: flow_min > flow_max")

    seen = set()
    for g in case.generators:
        if g.id in seen:
            rep.add(f"duplicate generator id {g.id!r}")
        seen.add(g.id)
        if g.bus not in bus_set:
            rep.add(f"generator {g.id!r}: dangling bus reference")
        if g.kind not in GEN_KINDS:
            rep.add(f"generator {g.id!r}: unknown kind {g.kind!r}")
        if not 0 <= g.g_min <= g.g_max:
            rep.add(f"generator {g.id!r}: need 0 <= g_min <= g_max")
        if g.ramp_up < 0 or g.ramp_down < 0:
            rep.add(f"generator {g.id!r}: negative ramp limit")
        if g.is_conventional and (g.min_up < 1 or g.min_down < 1):
            rep.add(f"generator {g.id!r}: min up/down must be >= 1 period")
        if g.is_renewable and g.g_min != 0.0:
            rep.add(f"generator {g.id!r}: renewables must have g_min = 0")
        if g.is_renewable and g.supply_ref is None:
            rep.add(f"generator {g.id!r}: renewable without supply_ref")

    if not any(g.kind == "conventional_DA" for g in case.generators):
        rep.add("case has no conventional_DA generator")

    if not 0 <= case.reserve.ed_fraction <= case.reserve.uc_fraction <= 1:
        rep.add("reserve policy must satisfy 0 <= ed <= uc <= 1")
    if min(case.penalties.phi_over, case.penalties.phi_curtail,
           case.penalties.phi_unmet) < 0:
        rep.add("penalties must be nonnegative")
    for name in ("DA", "ST", "RT"):
        ts = case.timescales.layer(name)
        if ts.horizon < ts.solve_frequency:
            rep.add(f"{name} timescale: horizon < solve_frequency")
        if ts.horizon % ts.resolution or ts.solve_frequency % ts.resolution:
            rep.add(f"{name} timescale: horizon and solve_frequency must be "
                    f"multiples of resolution")

    if bus_set and case.lines is not None:
        reached = {bus_ids[0]}
        frontier = [bus_ids[0]]
        adj = {b: [] for b in bus_set}
        for ln in case.lines:
            if ln.from_bus in adj and ln.to_bus in adj:
                adj[ln.from_bus].append(ln.to_bus)
                adj[ln.to_bus].append(ln.from_bus)
        while frontier:
            for nxt in adj[frontier.pop()]:
                if nxt not in reached:
                    reached.add(nxt)
                    frontier.append(nxt)
        if reached != bus_set:
            rep.add(f"network is not connected; unreachable: "
                    f"{sorted(bus_set - reached)}")
    return rep


def reserve_requirement(policy, layer, load):
    """Reserve in MW for one bus: a layer-dependent fraction of its load."""
    if load < 0:
        raise InputError("load must be nonnegative")
    if layer in ("DA", "ST"):
        return policy.uc_fraction * load
    if layer == "RT":
        return policy.ed_fraction * load
    raise InputError(f"unknown layer {layer!r}")
