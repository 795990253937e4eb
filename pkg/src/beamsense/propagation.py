"""Received-power model: line of sight plus single-bounce wall reflections.

Paths are traced with the image-source construction against the four boundary
walls.  Obstacle rectangles are fully absorbing voids: any path crossing one
is dropped.  People are absorbing disks whose effect scales with the beam
footprint: a body shadows the fraction of the transmit beam's half-power
cross-section it covers, so narrow beams are blocked outright while wide
(omnidirectional) beams lose almost nothing to a single body.  This is what
makes beam directionality control the sensing granularity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codebook import Codebook, beam_width, gain, gain_all_beams, make_codebook, wrap_angle  # noqa: F401
from .geometry import segment_intersects_disk, segment_intersects_rect, segment_point_distance
from .scene import Device, Scene

SPEED_OF_LIGHT = 299_792_458.0

_ON_WALL_EPS = 1e-12
_COINCIDENT_EPS = 1e-9

# beam cross-section half-angle is capped so omni beams keep a finite footprint
_MAX_CONE_HALF_ANGLE = math.pi / 3.0

PATH_LOS = "los"
PATH_REFLECTION = "reflection"


@dataclass(frozen=True)
class ChannelParams:
    """Link-budget knobs shared by every device pair.

    max_reflections 1 keeps first-order wall bounces only; 2 adds the
    two-wall specular sequences (the experiment pipeline default).
    """

    frequency: float = 60e9
    tx_power_dbm: float = 10.0
    noise_floor_dbm: float = -100.0
    reflection_loss_db: float = 10.0
    rss_noise_sigma_db: float = 1.0
    furniture_loss_db: float = 0.0
    max_reflections: int = 1

    def __post_init__(self):
        if self.frequency <= 0:
            raise ValueError("frequency must be positive")
        if self.rss_noise_sigma_db < 0:
            raise ValueError("rss_noise_sigma_db must be >= 0")
        if self.max_reflections not in (0, 1, 2):
            raise ValueError("max_reflections must be 0, 1, or 2")


@dataclass(frozen=True)
class PathContribution:
    """One propagation path between a device pair.

    extra_loss_db accumulates reflection loss, furniture loss, and partial
    body shadowing; fully shadowed paths are dropped instead.
    """

    kind: str
    length: float
    departure_angle: float
    arrival_angle: float
    extra_loss_db: float = 0.0


def fspl_db(distance: float, frequency: float) -> float:
    """Free-space path loss 20*log10(4*pi*d*f/c) in dB."""
    if distance <= 0:
        raise ValueError("distance must be positive")
    return 20.0 * math.log10(4.0 * math.pi * distance * frequency / SPEED_OF_LIGHT)


def _wall_bounce(txp, rxp, axis, coord, lo, hi):
    """Specular bounce point on one boundary wall via the image source, or None.

    axis "x" means the wall lies at x == coord spanning y in [lo, hi]; axis "y"
    is the transposed case.  A device sitting exactly on the wall plane keeps a
    degenerate grazing bounce at its own position so the path count stays equal
    to the wall count.
    """
    if axis == "x":
        t_along, t_across = txp[1], txp[0]
        r_along, r_across = rxp[1], rxp[0]
    else:
        t_along, t_across = txp[0], txp[1]
        r_along, r_across = rxp[0], rxp[1]

    if abs(t_across - coord) <= _ON_WALL_EPS:
        b_along = t_along
    else:
        img_across = 2.0 * coord - t_across
        denom = r_across - img_across
        if abs(denom) <= _ON_WALL_EPS:
            return None
        t = (coord - img_across) / denom
        if t < 0.0 or t > 1.0:
            return None
        b_along = t_along + t * (r_along - t_along)
    if b_along < lo - _ON_WALL_EPS or b_along > hi + _ON_WALL_EPS:
        return None
    return (coord, b_along) if axis == "x" else (b_along, coord)


def _coincident(a, b) -> bool:
    return math.hypot(a[0] - b[0], a[1] - b[1]) <= _COINCIDENT_EPS


def _mirror(p, axis, coord):
    return (2.0 * coord - p[0], p[1]) if axis == "x" else (p[0], 2.0 * coord - p[1])


def _line_crossing(a, b, axis, coord, lo, hi):
    """Point where segment a-b crosses the wall line, or None."""
    a_across = a[0] if axis == "x" else a[1]
    b_across = b[0] if axis == "x" else b[1]
    denom = b_across - a_across
    if abs(denom) <= _ON_WALL_EPS:
        return None
    t = (coord - a_across) / denom
    if t < 0.0 or t > 1.0:
        return None
    along = (a[1] + t * (b[1] - a[1])) if axis == "x" else (a[0] + t * (b[0] - a[0]))
    if along < lo - _ON_WALL_EPS or along > hi + _ON_WALL_EPS:
        return None
    return (coord, along) if axis == "x" else (along, coord)


def _double_wall_bounce(txp, rxp, wall_a, wall_b):
    """Bounce points of the two-wall specular sequence wall_a then wall_b, or None."""
    axis_a, coord_a, lo_a, hi_a = wall_a
    axis_b, coord_b, lo_b, hi_b = wall_b
    if abs((txp[0] if axis_a == "x" else txp[1]) - coord_a) <= _ON_WALL_EPS:
        return None  # grazing start collapses onto the single-bounce path
    img1 = _mirror(txp, axis_a, coord_a)
    img2 = _mirror(img1, axis_b, coord_b)
    bounce_b = _line_crossing(img2, rxp, axis_b, coord_b, lo_b, hi_b)
    if bounce_b is None:
        return None
    bounce_a = _line_crossing(img1, bounce_b, axis_a, coord_a, lo_a, hi_a)
    if bounce_a is None:
        return None
    return bounce_a, bounce_b


def beam_footprint_halfangle(half_power_width: float) -> float:
    """Half-angle of the shadowing cross-section for a beam of given width."""
    return min(0.25 * half_power_width, _MAX_CONE_HALF_ANGLE)


def _body_shadow_db(points, total_length, people, cone_tan) -> float | None:
    """Accumulated body-shadow loss along a polyline, or None when fully blocked.

    Each person shadows the fraction of the beam cross-section covered by
    their disk chord, with the cross-section width growing as cone_tan times
    the distance to the nearer path endpoint.
    """
    loss = 0.0
    for p in people:
        worst = 0.0
        offset = 0.0
        for a, b in zip(points, points[1:]):
            leg_len = math.hypot(b[0] - a[0], b[1] - a[1])
            if leg_len <= _COINCIDENT_EPS:
                continue
            d = segment_point_distance(a[0], a[1], b[0], b[1], p.x, p.y)
            if d < p.radius:
                # arc position of the closest approach, for the cone width
                vx, vy = b[0] - a[0], b[1] - a[1]
                t = ((p.x - a[0]) * vx + (p.y - a[1]) * vy) / (leg_len * leg_len)
                t = min(max(t, 0.0), 1.0)
                s = offset + t * leg_len
                aperture = 2.0 * cone_tan * min(s, total_length - s)
                chord = 2.0 * math.sqrt(max(p.radius * p.radius - d * d, 0.0))
                fraction = 1.0 if aperture <= chord else chord / aperture
                worst = max(worst, fraction)
            offset += leg_len
        if worst >= 1.0:
            return None
        if worst > 0.0:
            loss += -10.0 * math.log10(1.0 - worst)
    return loss


def _crosses_obstacle(points, obstacles) -> bool:
    for a, b in zip(points, points[1:]):
        if _coincident(a, b):
            continue
        for rect in obstacles:
            if segment_intersects_rect(a[0], a[1], b[0], b[1], rect):
                return True
    return False


def trace_paths(scene: Scene, tx: Device, rx: Device, params: ChannelParams | None = None) -> list[PathContribution]:
    """All surviving paths between two devices: LOS plus one bounce per wall."""
    if params is None:
        params = ChannelParams()
    txp = (tx.x, tx.y)
    rxp = (rx.x, rx.y)
    if txp == rxp:
        raise ValueError("tx and rx must be at distinct positions")
    env = scene.environment
    walls = (
        ("x", 0.0, 0.0, env.height),
        ("x", env.width, 0.0, env.height),
        ("y", 0.0, 0.0, env.width),
        ("y", env.height, 0.0, env.width),
    )

    candidates = [(PATH_LOS, (txp, rxp), 0.0)]
    if params.max_reflections >= 1:
        for axis, coord, lo, hi in walls:
            bounce = _wall_bounce(txp, rxp, axis, coord, lo, hi)
            if bounce is not None:
                candidates.append((PATH_REFLECTION, (txp, bounce, rxp), params.reflection_loss_db))
    if params.max_reflections >= 2:
        for wall_a in walls:
            for wall_b in walls:
                if wall_a is wall_b:
                    continue
                bounces = _double_wall_bounce(txp, rxp, wall_a, wall_b)
                if bounces is not None:
                    candidates.append(
                        (PATH_REFLECTION, (txp, *bounces, rxp), 2.0 * params.reflection_loss_db)
                    )

    cone_tan = math.tan(beam_footprint_halfangle(tx.codebook_tx.half_power_width))
    paths = []
    for kind, points, reflection_loss in candidates:
        if _crosses_obstacle(points, env.obstacles):
            continue
        length = 0.0
        for (ax, ay), (bx, by) in zip(points, points[1:]):
            length += math.hypot(bx - ax, by - ay)
        shadow = _body_shadow_db(points, length, scene.people, cone_tan)
        if shadow is None:
            continue
        # degenerate grazing bounces collapse onto the direct segment
        first = next(p for p in points[1:] if not _coincident(p, txp))
        last = next(p for p in reversed(points[:-1]) if not _coincident(p, rxp))
        departure = math.atan2(first[1] - txp[1], first[0] - txp[0])
        arrival = math.atan2(last[1] - rxp[1], last[0] - rxp[0])
        paths.append(
            PathContribution(
                kind=kind,
                length=length,
                departure_angle=departure,
                arrival_angle=arrival,
                extra_loss_db=reflection_loss + params.furniture_loss_db + shadow,
            )
        )
    return paths


def pair_power_matrix(scene: Scene, tx: Device, rx: Device, params: ChannelParams) -> np.ndarray:
    """Noise-free linear received power (mW) for every (tx beam, rx beam) combination."""
    paths = trace_paths(scene, tx, rx, params)
    n_tx = tx.codebook_tx.n_beams
    n_rx = rx.codebook_rx.n_beams
    power = np.zeros((n_tx, n_rx))
    for path in paths:
        base_db = params.tx_power_dbm - fspl_db(path.length, params.frequency) - path.extra_loss_db
        base_mw = 10.0 ** (base_db / 10.0)
        if not math.isfinite(base_mw):
            continue
        tx_gains = gain_all_beams(tx.codebook_tx, path.departure_angle - tx.boresight_offset)
        rx_gains = gain_all_beams(rx.codebook_rx, path.arrival_angle - rx.boresight_offset)
        power += base_mw * np.outer(tx_gains, rx_gains)
    return power


def power_to_dbm(power_mw: np.ndarray) -> np.ndarray:
    """10*log10 of linear power, mapping zero to -inf without warnings."""
    power_mw = np.asarray(power_mw, dtype=float)
    out = np.full(power_mw.shape, -np.inf)
    nonzero = power_mw > 0.0
    out[nonzero] = 10.0 * np.log10(power_mw[nonzero])
    return out


def rss(
    scene: Scene,
    tx: Device,
    tx_beam: int,
    rx: Device,
    rx_beam: int,
    params: ChannelParams,
    rng: np.random.Generator | None = None,
) -> float:
    """Measured received power in dBm for one beam pair, clamped at the noise floor."""
    if not 0 <= tx_beam < tx.codebook_tx.n_beams:
        raise ValueError(f"tx beam {tx_beam} out of range")
    if not 0 <= rx_beam < rx.codebook_rx.n_beams:
        raise ValueError(f"rx beam {rx_beam} out of range")
    noise = float(rng.normal(0.0, params.rss_noise_sigma_db)) if rng is not None else 0.0
    power = pair_power_matrix(scene, tx, rx, params)[tx_beam, rx_beam]
    value = float(power_to_dbm(power)) + noise
    return max(value, params.noise_floor_dbm)
