"""Indoor scenes: environments, fixed device deployments, people arrangements.

Everything lives in a single horizontal plane.  People are absorbing disks,
devices are points carrying transmit/receive codebooks, and environments are
rectangular floors with axis-aligned walkable regions and absorbing obstacle
rectangles (such as a rail gap between two platforms).
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .codebook import Codebook, make_codebook
from .geometry import Rect

LABEL_COMPLIANCE = 0
LABEL_VIOLATION = 1
LABEL_NAMES = {LABEL_COMPLIANCE: "compliance", LABEL_VIOLATION: "violation"}
LABEL_VALUES = {name: value for value, name in LABEL_NAMES.items()}

SCENARIO_NAMES = ("office", "hall", "underground", "station")

DEFAULT_PERSON_RADIUS = 0.25
DEFAULT_SAFE_DISTANCE = 1.5
DEFAULT_MAX_PEOPLE = 6


class SamplingBudgetError(RuntimeError):
    """Raised when rejection sampling cannot satisfy the requested label."""


@dataclass(frozen=True)
class Person:
    """An absorbing disk standing somewhere in a walkable region."""

    x: float
    y: float
    radius: float = DEFAULT_PERSON_RADIUS

    @property
    def center(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Environment:
    """Rectangular floor plan with walkable regions and absorbing obstacles."""

    width: float
    height: float
    obstacles: tuple[Rect, ...] = ()
    walkable: tuple[Rect, ...] = ()

    @property
    def bounds(self) -> Rect:
        return Rect(0.0, 0.0, self.width, self.height)

    def validate(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"environment must have positive size, got {self.width}x{self.height}")
        bounds = self.bounds
        for region in self.walkable:
            if not bounds.contains_rect(region):
                raise ValueError(f"walkable region {region} extends outside the floor")
        for obstacle in self.obstacles:
            if not bounds.contains_rect(obstacle):
                raise ValueError(f"obstacle {obstacle} extends outside the floor")
            for region in self.walkable:
                if obstacle.overlaps(region):
                    raise ValueError(f"obstacle {obstacle} overlaps walkable region {region}")


@dataclass(frozen=True, eq=False)
class Device:
    """A fixed transceiver with its transmit and receive codebooks."""

    id: int
    x: float
    y: float
    boresight_offset: float
    codebook_tx: Codebook
    codebook_rx: Codebook

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Arrangement:
    """A static placement of people together with its separation label."""

    people: tuple[Person, ...]
    label: int
    seed: int


@dataclass(frozen=True)
class Scene:
    """An environment populated with people; the input to path tracing."""

    environment: Environment
    people: tuple[Person, ...] = ()


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """A complete monitored deployment: floor plan, devices, sampling settings."""

    name: str
    environment: Environment
    devices: tuple[Device, ...]
    safe_distance: float = DEFAULT_SAFE_DISTANCE
    max_people: int = DEFAULT_MAX_PEOPLE
    person_radius: float = DEFAULT_PERSON_RADIUS
    n_violation_arrangements: int = 40
    n_compliance_arrangements: int = 40

    def validate(self) -> None:
        self.environment.validate()
        if self.safe_distance <= 0:
            raise ValueError("safe_distance must be positive")
        if self.max_people < 1:
            raise ValueError("max_people must be >= 1")
        if self.person_radius <= 0:
            raise ValueError("person_radius must be positive")
        bounds = self.environment.bounds
        seen_ids = set()
        for device in self.devices:
            if device.id in seen_ids:
                raise ValueError(f"duplicate device id {device.id}")
            seen_ids.add(device.id)
            if not bounds.contains(device.x, device.y):
                raise ValueError(f"device {device.id} at ({device.x}, {device.y}) is outside the floor")

    def scene_for(self, arrangement: Arrangement) -> Scene:
        return Scene(self.environment, arrangement.people)


def label_of(people, safe_distance: float) -> int:
    """Violation when any pair of centers is strictly closer than safe_distance."""
    persons = list(people)
    for i in range(len(persons)):
        for j in range(i + 1, len(persons)):
            if math.hypot(persons[i].x - persons[j].x, persons[i].y - persons[j].y) < safe_distance:
                return LABEL_VIOLATION
    return LABEL_COMPLIANCE


def _corner_positions(width: float, height: float, inset: float = 0.5):
    return (
        (inset, inset),
        (width - inset, inset),
        (width - inset, height - inset),
        (inset, height - inset),
    )


def _scenario_geometry(name: str):
    """Floor plan and device positions for the four built-in scenarios."""
    if name == "office":
        env = Environment(5.0, 5.0, walkable=(Rect(0.0, 0.0, 5.0, 5.0),))
        positions = _corner_positions(5.0, 5.0)
    elif name == "hall":
        env = Environment(10.0, 10.0, walkable=(Rect(0.0, 0.0, 10.0, 10.0),))
        positions = _corner_positions(10.0, 10.0)
    elif name == "underground":
        # 10x20 floor; people and devices share the 5m-wide platform, the
        # remaining half is open (non-walkable) track space.  Devices zigzag
        # across the platform width so their sweep corridors cover it.
        env = Environment(10.0, 20.0, walkable=(Rect(0.0, 0.0, 5.0, 20.0),))
        positions = tuple(
            (0.5 if k % 2 == 0 else 4.5, 20.0 * (k + 0.5) / 4.0) for k in range(4)
        )
    elif name == "station":
        # two platforms separated by a fully absorbing 10m rail gap
        env = Environment(
            20.0,
            20.0,
            obstacles=(Rect(5.0, 0.0, 15.0, 20.0),),
            walkable=(Rect(0.0, 0.0, 5.0, 20.0), Rect(15.0, 0.0, 20.0, 20.0)),
        )
        # per platform the two devices sit on opposite edges at 1/3 and 2/3
        # of its length, so the pair sweep crosses the platform diagonally
        positions = (
            (0.5, 20.0 / 3.0),
            (4.5, 40.0 / 3.0),
            (15.5, 20.0 / 3.0),
            (19.5, 40.0 / 3.0),
        )
    else:
        raise ValueError(f"unknown scenario {name!r}; expected one of {SCENARIO_NAMES}")
    return env, positions


def build_scenario(
    name: str,
    *,
    n_tx: int = 32,
    n_rx: int = 1,
    alpha: float = 1.0,
    sidelobe_ratio: float = 0.001,
    safe_distance: float = DEFAULT_SAFE_DISTANCE,
    max_people: int = DEFAULT_MAX_PEOPLE,
    person_radius: float = DEFAULT_PERSON_RADIUS,
    n_violation_arrangements: int = 40,
    n_compliance_arrangements: int = 40,
) -> ScenarioConfig:
    """Build one of the built-in scenarios, optionally overriding its defaults."""
    env, positions = _scenario_geometry(name)
    codebook_tx = make_codebook(n_tx, alpha, sidelobe_ratio)
    codebook_rx = make_codebook(n_rx, alpha, sidelobe_ratio)
    devices = tuple(
        Device(id=i, x=px, y=py, boresight_offset=0.0, codebook_tx=codebook_tx, codebook_rx=codebook_rx)
        for i, (px, py) in enumerate(positions)
    )
    cfg = ScenarioConfig(
        name=name,
        environment=env,
        devices=devices,
        safe_distance=safe_distance,
        max_people=max_people,
        person_radius=person_radius,
        n_violation_arrangements=n_violation_arrangements,
        n_compliance_arrangements=n_compliance_arrangements,
    )
    cfg.validate()
    return cfg


def _placement_regions(cfg: ScenarioConfig):
    """Feasible-center rectangles (walkable regions shrunk by the person radius)."""
    r = cfg.person_radius
    regions = []
    for region in cfg.environment.walkable:
        if region.width > 2 * r and region.height > 2 * r:
            regions.append(Rect(region.x0 + r, region.y0 + r, region.x1 - r, region.y1 - r))
    if not regions:
        raise ValueError("no walkable region can fit a person")
    return regions


def _place_people(rng, cfg: ScenarioConfig, count: int, regions, weights, max_point_tries: int = 200):
    r = cfg.person_radius
    people: list[Person] = []
    for _ in range(count):
        for _ in range(max_point_tries):
            idx = int(rng.choice(len(regions), p=weights))
            region = regions[idx]
            x = float(rng.uniform(region.x0, region.x1))
            y = float(rng.uniform(region.y0, region.y1))
            if any(obs.distance_to_point(x, y) < r for obs in cfg.environment.obstacles):
                continue
            if any(math.hypot(x - p.x, y - p.y) < r + p.radius for p in people):
                continue
            people.append(Person(x, y, r))
            break
        else:
            return None
    return people


def sample_arrangement(
    cfg: ScenarioConfig,
    target_label: int,
    rng_seed: int,
    max_attempts: int = 100_000,
) -> Arrangement:
    """Rejection-sample a uniform placement whose label matches target_label.

    The person count is drawn once (uniform over {2..max_people} for violation
    targets, {1..max_people} for compliance) and whole placements are redrawn
    until the computed label matches.  Deterministic for a given seed.
    """
    if target_label not in LABEL_NAMES:
        raise ValueError(f"unknown label {target_label}")
    rng = np.random.default_rng(rng_seed)
    regions = _placement_regions(cfg)
    areas = np.array([reg.area for reg in regions])
    weights = areas / areas.sum()
    if target_label == LABEL_VIOLATION:
        if cfg.max_people < 2:
            raise ValueError("violation arrangements need max_people >= 2")
        count = int(rng.integers(2, cfg.max_people + 1))
    else:
        count = int(rng.integers(1, cfg.max_people + 1))
    for _ in range(max_attempts):
        people = _place_people(rng, cfg, count, regions, weights)
        if people is None:
            continue
        if label_of(people, cfg.safe_distance) == target_label:
            return Arrangement(people=tuple(people), label=target_label, seed=rng_seed)
    raise SamplingBudgetError(
        f"could not sample a {LABEL_NAMES[target_label]} arrangement with {count} people "
        f"in {max_attempts} attempts (scenario {cfg.name!r})"
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def serialize_arrangement(arrangement: Arrangement) -> str:
    """Line-oriented text form: a comment header, then one `x,y,radius` per person."""
    lines = [f"# arrangement seed={arrangement.seed} label={LABEL_NAMES[arrangement.label]}"]
    for p in arrangement.people:
        lines.append(f"{p.x!r},{p.y!r},{p.radius!r}")
    return "\n".join(lines) + "\n"


def parse_arrangement(text: str) -> Arrangement:
    seed = 0
    label = LABEL_COMPLIANCE
    people = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for token in line[1:].split():
                if token.startswith("seed="):
                    seed = int(token[5:])
                elif token.startswith("label="):
                    label = LABEL_VALUES[token[6:]]
            continue
        x, y, radius = (float(v) for v in line.split(","))
        people.append(Person(x, y, radius))
    return Arrangement(people=tuple(people), label=label, seed=seed)


def scenario_config_text(cfg: ScenarioConfig) -> str:
    """Canonical INI form of a scenario; also the input to scenario_hash."""
    parser = configparser.ConfigParser()
    parser["scenario"] = {
        "name": cfg.name,
        "safe_distance": repr(cfg.safe_distance),
        "max_people": str(cfg.max_people),
        "person_radius": repr(cfg.person_radius),
        "n_violation_arrangements": str(cfg.n_violation_arrangements),
        "n_compliance_arrangements": str(cfg.n_compliance_arrangements),
        "n_tx": str(cfg.devices[0].codebook_tx.n_beams if cfg.devices else 0),
        "n_rx": str(cfg.devices[0].codebook_rx.n_beams if cfg.devices else 0),
        "alpha": repr(cfg.devices[0].codebook_tx.alpha if cfg.devices else 0.0),
        "sidelobe_ratio": repr(cfg.devices[0].codebook_tx.sidelobe_ratio if cfg.devices else 0.01),
    }
    parser["environment"] = {
        "width": repr(cfg.environment.width),
        "height": repr(cfg.environment.height),
    }
    for i, region in enumerate(cfg.environment.walkable):
        parser[f"walkable.{i}"] = {
            "x0": repr(region.x0), "y0": repr(region.y0),
            "x1": repr(region.x1), "y1": repr(region.y1),
        }
    for i, obstacle in enumerate(cfg.environment.obstacles):
        parser[f"obstacle.{i}"] = {
            "x0": repr(obstacle.x0), "y0": repr(obstacle.y0),
            "x1": repr(obstacle.x1), "y1": repr(obstacle.y1),
        }
    for device in cfg.devices:
        parser[f"device.{device.id}"] = {
            "x": repr(device.x),
            "y": repr(device.y),
            "boresight_offset": repr(device.boresight_offset),
        }
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()


def scenario_hash(cfg: ScenarioConfig) -> str:
    return hashlib.sha256(scenario_config_text(cfg).encode()).hexdigest()[:12]


def save_scenario_config(cfg: ScenarioConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(scenario_config_text(cfg))


def load_scenario_config(path, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Load a scenario INI file; missing keys fall back to `base` (or its defaults)."""
    parser = configparser.ConfigParser()
    with open(path, "r", encoding="utf-8") as fh:
        parser.read_file(fh)
    sc = parser["scenario"] if parser.has_section("scenario") else {}

    def get(section, key, fallback):
        return section.get(key, fallback) if section else fallback

    name = get(sc, "name", base.name if base else "custom")
    if base is not None:
        defaults = base
    else:
        defaults = None

    safe_distance = float(get(sc, "safe_distance", defaults.safe_distance if defaults else DEFAULT_SAFE_DISTANCE))
    max_people = int(get(sc, "max_people", defaults.max_people if defaults else DEFAULT_MAX_PEOPLE))
    person_radius = float(get(sc, "person_radius", defaults.person_radius if defaults else DEFAULT_PERSON_RADIUS))
    n_violation = int(get(sc, "n_violation_arrangements", defaults.n_violation_arrangements if defaults else 40))
    n_compliance = int(get(sc, "n_compliance_arrangements", defaults.n_compliance_arrangements if defaults else 40))
    default_tx = defaults.devices[0].codebook_tx if defaults and defaults.devices else None
    default_rx = defaults.devices[0].codebook_rx if defaults and defaults.devices else None
    n_tx = int(get(sc, "n_tx", default_tx.n_beams if default_tx else 32))
    n_rx = int(get(sc, "n_rx", default_rx.n_beams if default_rx else 1))
    alpha = float(get(sc, "alpha", default_tx.alpha if default_tx else 1.0))
    sidelobe = float(get(sc, "sidelobe_ratio", default_tx.sidelobe_ratio if default_tx else 0.001))

    if parser.has_section("environment"):
        env_sec = parser["environment"]
        width = float(env_sec["width"])
        height = float(env_sec["height"])
        walkable = []
        obstacles = []
        for section in parser.sections():
            values = parser[section]
            if section.startswith("walkable."):
                walkable.append(Rect(float(values["x0"]), float(values["y0"]),
                                     float(values["x1"]), float(values["y1"])))
            elif section.startswith("obstacle."):
                obstacles.append(Rect(float(values["x0"]), float(values["y0"]),
                                      float(values["x1"]), float(values["y1"])))
        env = Environment(width, height, obstacles=tuple(obstacles), walkable=tuple(walkable))
    elif defaults is not None:
        env = defaults.environment
    else:
        raise ValueError(f"{path}: missing [environment] section and no base config given")

    codebook_tx = make_codebook(n_tx, alpha, sidelobe)
    codebook_rx = make_codebook(n_rx, alpha, sidelobe)
    device_sections = sorted(
        (s for s in parser.sections() if s.startswith("device.")),
        key=lambda s: int(s.split(".", 1)[1]),
    )
    if device_sections:
        devices = tuple(
            Device(
                id=int(section.split(".", 1)[1]),
                x=float(parser[section]["x"]),
                y=float(parser[section]["y"]),
                boresight_offset=float(parser[section].get("boresight_offset", "0.0")),
                codebook_tx=codebook_tx,
                codebook_rx=codebook_rx,
            )
            for section in device_sections
        )
    elif defaults is not None:
        devices = tuple(
            replace(d, codebook_tx=codebook_tx, codebook_rx=codebook_rx) for d in defaults.devices
        )
    else:
        raise ValueError(f"{path}: missing device sections and no base config given")

    cfg = ScenarioConfig(
        name=name,
        environment=env,
        devices=devices,
        safe_distance=safe_distance,
        max_people=max_people,
        person_radius=person_radius,
        n_violation_arrangements=n_violation,
        n_compliance_arrangements=n_compliance,
    )
    cfg.validate()
    return cfg
