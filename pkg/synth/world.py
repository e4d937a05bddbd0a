"""Declarative synthetic worlds and scenarios.

Both documents are pydantic models, read from and written to JSON. A world
holds access points, places and walkways; a scenario holds the schedules of
the simulated users and the noise model.
"""

from pathlib import Path
from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from utils.exceptions import ConfigurationError, MalformedMac
from utils.geo import equirectangular_xy
from utils.validators import TraceValidator

FLOOR_HEIGHT_M = 3.0
MIN_PLACE_COVERAGE = 5


class AccessPoint(BaseModel):
    """A transmitter; ``tx_power`` is the RSS one meter away."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    mac: str
    lat: float = Field(ge=-90, le=90)
    lon: float = Field(ge=-180, le=180)
    floor: int = 0
    tx_power: float = -40.0
    zone: Optional[str] = None

    @field_validator("mac")
    @classmethod
    def _normalize_mac(cls, value: str) -> str:
        try:
            return TraceValidator.normalize_mac(value)
        except MalformedMac as e:
            raise ValueError(str(e)) from e


class Position(BaseModel):
    """Where a receiver is at one instant."""
    model_config = ConfigDict(frozen=True)

    lat: float
    lon: float
    floor: int = 0
    zone: Optional[str] = None
    sheltered: bool = False


class Place(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    lat: float = Field(ge=-90, le=90)
    lon: float = Field(ge=-180, le=180)
    floor: int = 0
    zone: Optional[str] = None
    sheltered: bool = True
    label: Optional[str] = None

    def position(self) -> Position:
        return Position(lat=self.lat, lon=self.lon, floor=self.floor, zone=self.zone, sheltered=self.sheltered)


class Leg(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    zone: Optional[str] = None
    sheltered: bool = False


class Walkway(BaseModel):
    """A polyline corridor; ``legs[i]`` describes the stretch from point i to i+1."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    points: List[Tuple[float, float]] = Field(min_length=2)
    floor: int = 0
    legs: List[Leg] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_legs(self) -> "Walkway":
        if self.legs and len(self.legs) != len(self.points) - 1:
            raise ValueError(f"walkway {self.name}: need one leg per stretch ({len(self.points) - 1})")
        return self

    def leg(self, i: int) -> Leg:
        return self.legs[i] if self.legs else Leg()


class World(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    aps: List[AccessPoint]
    places: List[Place] = Field(default_factory=list)
    walkways: List[Walkway] = Field(default_factory=list)
    path_loss_exponent: float = Field(3.0, gt=0)
    floor_loss_db: float = Field(30.0, ge=0)
    wall_loss_db: float = Field(20.0, ge=0)
    detection_floor_dbm: float = Field(-95.0, ge=-120, lt=0)

    @model_validator(mode="after")
    def _check(self) -> "World":
        macs = [ap.mac for ap in self.aps]
        if len(set(macs)) != len(macs):
            raise ValueError("access point MACs must be unique")
        names = [p.name for p in self.places] + [w.name for w in self.walkways]
        if len(set(names)) != len(names):
            raise ValueError("place and walkway names must be unique")
        for place in self.places:
            heard = int((self.mean_rss(place.position()) >= self.detection_floor_dbm).sum())
            if heard < MIN_PLACE_COVERAGE:
                raise ValueError(f"place {place.name} hears {heard} APs, needs {MIN_PLACE_COVERAGE}")
        return self

    def place(self, name: str) -> Place:
        for p in self.places:
            if p.name == name:
                return p
        raise KeyError(name)

    def walkway(self, name: str) -> Walkway:
        for w in self.walkways:
            if w.name == name:
                return w
        raise KeyError(name)

    def mean_rss(self, at: Position) -> np.ndarray:
        """Noise-free RSS of every AP at a position (log-distance path loss)."""
        x0, y0 = equirectangular_xy(at.lat, at.lon, at.lat)
        xy = np.array([equirectangular_xy(ap.lat, ap.lon, at.lat) for ap in self.aps]).reshape(-1, 2)
        floors = np.abs(np.array([ap.floor for ap in self.aps]) - at.floor)
        d = np.sqrt((xy[:, 0] - x0) ** 2 + (xy[:, 1] - y0) ** 2 + (floors * FLOOR_HEIGHT_M) ** 2)
        walls = np.array([ap.zone is not None and ap.zone != at.zone for ap in self.aps], dtype=float)
        loss = (10 * self.path_loss_exponent * np.log10(np.maximum(d, 1.0))
                + self.floor_loss_db * floors + self.wall_loss_db * walls)
        return np.array([ap.tx_power for ap in self.aps]) - loss

    @classmethod
    def load(cls, path: str) -> "World":
        return _load(cls, path)


class Visit(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["visit"] = "visit"
    place: str
    arrive: int
    depart: int

    @property
    def start(self) -> int:
        return self.arrive

    @property
    def end(self) -> int:
        return self.depart


class Transit(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["transit"] = "transit"
    walkway: str
    depart: int
    arrive: int
    reverse: bool = False

    @property
    def start(self) -> int:
        return self.depart

    @property
    def end(self) -> int:
        return self.arrive


Step = Annotated[Union[Visit, Transit], Field(discriminator="kind")]


class Agent(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    user: str = Field(min_length=1)
    schedule: List[Step] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_schedule(self) -> "Agent":
        prev_end = None
        for step in self.schedule:
            if step.end <= step.start:
                raise ValueError(f"agent {self.user}: schedule step ends before it starts ({step.start} -> {step.end})")
            if prev_end is not None and step.start < prev_end:
                raise ValueError(f"agent {self.user}: schedule steps overlap at {step.start}")
            prev_end = step.end
        return self


class NoiseModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    rss_sigma_db: float = Field(2.0, ge=0)
    sheltered_accuracy_m: Tuple[float, float] = (28.0, 48.0)
    open_accuracy_m: Tuple[float, float] = (5.0, 20.0)
    sheltered_scatter_m: float = Field(12.0, ge=0)
    open_scatter_m: float = Field(4.0, ge=0)
    gps_offset_s: int = Field(3, ge=0)


class Scenario(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    agents: List[Agent]
    noise: NoiseModel = Field(default_factory=NoiseModel)
    scan_interval_s: int = Field(300, gt=0)

    @model_validator(mode="after")
    def _check_agents(self) -> "Scenario":
        users = [a.user for a in self.agents]
        if len(set(users)) != len(users):
            raise ValueError("agent user ids must be unique")
        return self

    @classmethod
    def load(cls, path: str) -> "Scenario":
        return _load(cls, path)


def _load(model, path: str):
    try:
        return model.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigurationError(f"cannot read {path}: {e}") from e
    except ValueError as e:
        raise ConfigurationError(f"invalid {model.__name__.lower()} document {path}: {e}") from e


def check_references(world: World, scenario: Scenario) -> None:
    """Every scheduled place and walkway must exist in the world."""
    places = {p.name for p in world.places}
    walkways = {w.name for w in world.walkways}
    for agent in scenario.agents:
        for step in agent.schedule:
            if isinstance(step, Visit) and step.place not in places:
                raise ConfigurationError(f"agent {agent.user}: unknown place {step.place!r}")
            if isinstance(step, Transit) and step.walkway not in walkways:
                raise ConfigurationError(f"agent {agent.user}: unknown walkway {step.walkway!r}")


def ap_counts(world: World) -> Dict[str, int]:
    """APs heard (noise-free) at each place."""
    return {p.name: int((world.mean_rss(p.position()) >= world.detection_floor_dbm).sum())
            for p in world.places}
