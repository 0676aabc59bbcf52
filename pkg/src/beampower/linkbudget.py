"""Per-beam link budget: power to data rate under ACM, and its inverse.

Powers are in dBW, gains and losses in dB, bandwidth in Hz and rates in
bps. The scalar helpers mirror the textbook formulas one to one; the
:class:`LinkModel` precomputes per-(beam, MODCOD) terms and hands the
array work to :mod:`beampower.kernels`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels

BOLTZMANN = 1.38e-23

# Per-beam ranges for the link constants (uniform draw per beam).
G_TX_RANGE = (50.2, 50.9)
G_RX_RANGE = (39.3, 40.0)
FSPL_RANGE = (209.0, 210.1)
BW_RANGE = (655e6, 800e6)
ROLLOFF = 0.1
MARGIN_DB = 0.5


@dataclass(frozen=True)
class PhysicalConstants:
    boltzmann: float = BOLTZMANN


@dataclass(frozen=True)
class BeamParams:
    g_tx: float
    g_rx: float
    fspl: float
    bw: float
    p_max: float
    rolloff: float = ROLLOFF
    margin: float = MARGIN_DB
    obo: float = 0.0
    t_sys: float = 290.0

    def __post_init__(self):
        if not self.bw > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bw}")
        if not self.rolloff >= 0:
            raise ValueError(f"roll-off must be non-negative, got {self.rolloff}")
        if not self.t_sys > 0:
            raise ValueError(f"system temperature must be positive, got {self.t_sys}")
        if not self.margin >= 0:
            raise ValueError(f"link margin must be non-negative, got {self.margin}")


@dataclass(frozen=True)
class ModcodScheme:
    name: str
    gamma: float
    ebn_threshold: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"{self.name}: spectral efficiency must be positive")


class ModcodTable:
    """Ordered MODCOD list, strictly increasing in efficiency.

    Thresholds must be non-decreasing along the table, which makes the
    power needed for each scheme strictly increasing as well.
    """

    def __init__(self, schemes: Iterable[ModcodScheme]):
        self.schemes = tuple(schemes)
        if not self.schemes:
            raise ValueError("MODCOD table is empty")
        for lo, hi in zip(self.schemes, self.schemes[1:]):
            if not hi.gamma > lo.gamma:
                raise ValueError(f"gamma not strictly increasing at {hi.name}")
            if hi.ebn_threshold < lo.ebn_threshold:
                raise ValueError(f"threshold decreases at {hi.name}")

    def __len__(self):
        return len(self.schemes)

    def __iter__(self):
        return iter(self.schemes)

    def __getitem__(self, i):
        return self.schemes[i]

    @property
    def gammas(self) -> np.ndarray:
        return np.array([s.gamma for s in self.schemes])

    @property
    def thresholds(self) -> np.ndarray:
        return np.array([s.ebn_threshold for s in self.schemes])


def parse_modcod_text(text: str, source: str = "<string>") -> ModcodTable:
    schemes = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 3:
            raise ValueError(f"{source}:{lineno}: expected 'name gamma threshold'")
        try:
            gamma, threshold = float(fields[1]), float(fields[2])
        except ValueError:
            raise ValueError(f"{source}:{lineno}: malformed number") from None
        schemes.append(ModcodScheme(fields[0], gamma, threshold))
    return ModcodTable(schemes)


def load_modcod_table(path) -> ModcodTable:
    path = Path(path)
    return parse_modcod_text(path.read_text(), str(path))


def default_modcod_table() -> ModcodTable:
    text = resources.files("beampower").joinpath("data/dvbs2_modcods.txt").read_text()
    return parse_modcod_text(text, "dvbs2_modcods.txt")


def noise_density_db(t_sys: float, consts: PhysicalConstants = PhysicalConstants()) -> float:
    """10*log10(k*T_sys), in dBW/Hz."""
    return 10.0 * math.log10(consts.boltzmann * t_sys)


def carrier_to_noise_density(power_dbw, beam: BeamParams, consts=PhysicalConstants()):
    """C/N0 in dB-Hz for a transmit power in dBW."""
    return (
        power_dbw
        - beam.obo
        + beam.g_tx
        + beam.g_rx
        - beam.fspl
        - noise_density_db(beam.t_sys, consts)
    )


def eb_over_n(cn0, bw, rate):
    """Eb/N in dB as ``C/N0 * BW/R`` taken in the dB domain."""
    if not rate > 0:
        raise ValueError(f"rate must be positive, got {rate}")
    if not bw > 0:
        raise ValueError(f"bandwidth must be positive, got {bw}")
    return cn0 + 10.0 * math.log10(bw / rate)


def rate_for_modcod(scheme: ModcodScheme, beam: BeamParams) -> float:
    return beam.bw / (1.0 + beam.rolloff) * scheme.gamma


def link_constant(beam: BeamParams, consts=PhysicalConstants()) -> float:
    """Everything in C/N0 except the transmit power (dB)."""
    return carrier_to_noise_density(0.0, beam, consts)


class LinkModel:
    """Array view of a set of beams sharing one MODCOD table.

    Array arguments carry beams on the last axis; any leading shape is
    allowed.
    """

    def __init__(self, beams: Sequence[BeamParams], table: ModcodTable,
                 consts: PhysicalConstants = PhysicalConstants()):
        self.beams = tuple(beams)
        if not self.beams:
            raise ValueError("need at least one beam")
        self.table = table
        self.consts = consts
        self.link_const = np.array([link_constant(b, consts) for b in self.beams])
        self.rates = np.array([[rate_for_modcod(s, b) for s in table] for b in self.beams])
        self.need = np.array([[s.ebn_threshold + b.margin for s in table] for b in self.beams])
        bw = np.array([b.bw for b in self.beams])
        self.spread = 10.0 * np.log10(bw[:, None] / self.rates)
        self.p_max_dbw = np.array([b.p_max for b in self.beams])
        self.p_max_w = dbw_to_w(self.p_max_dbw)
        self.keepalive_dbw = kernels.keepalive_power(self.link_const, self.need, self.spread)

    @property
    def n_beams(self) -> int:
        return len(self.beams)

    @property
    def top_rates(self) -> np.ndarray:
        return self.rates[:, -1].copy()

    def _as_2d(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n_beams:
            raise ValueError(f"expected {self.n_beams} beams on the last axis, got {x.shape}")
        return np.ascontiguousarray(x.reshape(-1, self.n_beams)), x.shape

    def achieved_rate(self, power_dbw) -> np.ndarray:
        p, shape = self._as_2d(power_dbw)
        return kernels.achieved_rate(p, self.link_const, self.need, self.spread, self.rates).reshape(shape)

    def achieved_rate_w(self, power_w) -> np.ndarray:
        return self.achieved_rate(w_to_dbw(power_w))

    def optimal_power(self, demand):
        """Minimum power (dBW) meeting ``demand``, plus a satisfiable mask."""
        d, shape = self._as_2d(demand)
        if np.any(d < 0):
            raise ValueError("demand must be non-negative")
        p, ok = kernels.optimal_power(d, self.link_const, self.need, self.spread,
                                      self.rates, self.p_max_dbw)
        return p.reshape(shape), ok.reshape(shape)

    def optimal_power_w(self, demand):
        """Optimal power in Watts, safe against the dBW round trip.

        The Watt value is nudged up by ulps until converting it back to dBW
        still reaches the rate the dBW optimum achieves.
        """
        p_dbw, ok = self.optimal_power(demand)
        target = self.achieved_rate(p_dbw)
        p_w = dbw_to_w(p_dbw)
        short = self.achieved_rate_w(p_w) < target
        while short.any():
            p_w = np.where(short, np.nextafter(p_w, np.inf), p_w)
            short = self.achieved_rate_w(p_w) < target
        return p_w, ok


def dbw_to_w(p_dbw):
    return np.power(10.0, np.asarray(p_dbw, dtype=float) / 10.0)


def w_to_dbw(p_w):
    p_w = np.asarray(p_w, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(p_w > 0, 10.0 * np.log10(np.where(p_w > 0, p_w, 1.0)), -np.inf)


def achieved_rate(power_dbw: float, beam: BeamParams, table: ModcodTable,
                  consts: PhysicalConstants = PhysicalConstants()) -> float:
    """Rate of the most efficient MODCOD that closes the link, else 0."""
    return float(LinkModel([beam], table, consts).achieved_rate([power_dbw])[0])


def optimal_power(demand: float, beam: BeamParams, table: ModcodTable,
                  consts: PhysicalConstants = PhysicalConstants()) -> tuple[float, bool]:
    if demand < 0:
        raise ValueError(f"demand must be non-negative, got {demand}")
    p, ok = LinkModel([beam], table, consts).optimal_power([demand])
    return float(p[0]), bool(ok[0])


def keepalive_power(beam: BeamParams, table: ModcodTable,
                    consts: PhysicalConstants = PhysicalConstants()) -> float:
    return float(LinkModel([beam], table, consts).keepalive_dbw[0])


def scheme_power(scheme: ModcodScheme, beam: BeamParams,
                 consts: PhysicalConstants = PhysicalConstants()) -> float:
    """Power (dBW) at which ``scheme`` exactly closes the link, before ulp fixes."""
    need = scheme.ebn_threshold + beam.margin
    return need - 10.0 * math.log10(beam.bw / rate_for_modcod(scheme, beam)) - link_constant(beam, consts)


def draw_beams(n_beams: int, rng: np.random.Generator, table: ModcodTable,
               p_max_over_keepalive_db: float = 14.0, obo: float = 0.0, t_sys: float = 290.0,
               consts: PhysicalConstants = PhysicalConstants()) -> list[BeamParams]:
    """Draw beam constants uniformly from the configured ranges.

    Each beam's ``p_max`` sits ``p_max_over_keepalive_db`` above the power
    that keeps its lowest MODCOD alive.
    """
    beams = []
    for _ in range(n_beams):
        draft = BeamParams(
            g_tx=rng.uniform(*G_TX_RANGE),
            g_rx=rng.uniform(*G_RX_RANGE),
            fspl=rng.uniform(*FSPL_RANGE),
            bw=rng.uniform(*BW_RANGE),
            p_max=0.0,
            obo=obo,
            t_sys=t_sys,
        )
        p_max = scheme_power(table[0], draft, consts) + p_max_over_keepalive_db
        beams.append(BeamParams(**{**draft.__dict__, "p_max": p_max}))
    return beams
