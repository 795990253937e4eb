"""Beam codebooks: evenly spaced flat-sector patterns with a sidelobe floor.

A codebook with N beams at directionality alpha has half-power width
W = 2*pi * [1 - (1 - 1/N) * alpha], so alpha=1 yields 2*pi/N wide beams and
alpha=0 yields omnidirectional ones.  Each beam is a flat main-lobe sector of
width W plus a constant sidelobe floor, normalized to unit average gain over
the full circle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def beam_width(n_beams: int, alpha: float) -> float:
    """Half-power beamwidth in radians for an n-beam codebook at directionality alpha."""
    if n_beams < 1:
        raise ValueError(f"n_beams must be >= 1, got {n_beams}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be within [0, 1], got {alpha}")
    return TWO_PI * (1.0 - (1.0 - 1.0 / n_beams) * alpha)


def wrap_angle(angle):
    """Wrap an angle (scalar or array) to [-pi, pi)."""
    return (angle + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True, eq=False)
class Codebook:
    """A set of directional beams sharing one width and sidelobe level.

    beam_directions holds the boresight of each beam in the device frame,
    evenly spaced at k * 2*pi / n_beams.
    """

    n_beams: int
    alpha: float
    beam_directions: np.ndarray
    half_power_width: float
    sidelobe_ratio: float = 0.001

    @property
    def main_gain(self) -> float:
        # normalization: main_gain * W + sidelobe * (2*pi - W) == 2*pi
        w = self.half_power_width
        return TWO_PI / (w + self.sidelobe_ratio * (TWO_PI - w))


def make_codebook(n_beams: int, alpha: float, sidelobe_ratio: float = 0.001) -> Codebook:
    width = beam_width(n_beams, alpha)
    directions = np.arange(n_beams, dtype=float) * (TWO_PI / n_beams)
    return Codebook(
        n_beams=int(n_beams),
        alpha=float(alpha),
        beam_directions=directions,
        half_power_width=width,
        sidelobe_ratio=float(sidelobe_ratio),
    )


def gain(codebook: Codebook, beam_index: int, angle: float) -> float:
    """Linear gain of one beam toward `angle`; the pattern averages to 1 over the circle."""
    if not 0 <= beam_index < codebook.n_beams:
        raise ValueError(f"beam index {beam_index} out of range for {codebook.n_beams} beams")
    offset = wrap_angle(angle - codebook.beam_directions[beam_index])
    g_main = codebook.main_gain
    if abs(offset) <= 0.5 * codebook.half_power_width:
        return g_main
    return codebook.sidelobe_ratio * g_main


def gain_all_beams(codebook: Codebook, angle: float) -> np.ndarray:
    """Vector of linear gains of every beam toward `angle`."""
    offsets = wrap_angle(angle - codebook.beam_directions)
    g_main = codebook.main_gain
    gains = np.full(codebook.n_beams, codebook.sidelobe_ratio * g_main)
    gains[np.abs(offsets) <= 0.5 * codebook.half_power_width] = g_main
    return gains
