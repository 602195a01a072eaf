"""Network geometry, discrete beam sets and UE scenario sampling.

Coordinates are 2D Cartesian in meters, the service area is a rectangle
centered at the origin.  All angles are radians internally; configuration
files store angles in degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

# rejection sampling gives up after this many candidate draws per UE
_MAX_REJECTION_DRAWS = 1_000_000


class ConfigError(ValueError):
    """Invalid network configuration or scenario parameters."""


class DimensionMismatchError(ValueError):
    """Data, model and configuration dimensions disagree."""


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts * 1e3)


# Default APs sit this far above the top edge so that no admissible UE
# position can violate the minimum link distance.
AP_EDGE_STANDOFF = 6.0


def default_ap_positions(n_aps: int, area_width: float, area_height: float) -> np.ndarray:
    """APs at the centers of n_aps equal segments, just above the top edge."""
    xs = -area_width / 2.0 + (np.arange(n_aps) + 0.5) * area_width / n_aps
    ys = np.full(n_aps, area_height / 2.0 + AP_EDGE_STANDOFF)
    return np.column_stack([xs, ys])


# Default noise: thermal floor -174 dBm/Hz over 100 MHz plus 9 dB noise figure.
DEFAULT_BANDWIDTH = 100e6
DEFAULT_NOISE_POWER = dbm_to_watts(-174.0 + 10.0 * math.log10(DEFAULT_BANDWIDTH) + 9.0)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class NetworkConfig:
    """All fixed physical and search-space parameters of the network.

    The receive beam direction of AP m is measured counterclockwise from
    ``ap_boresight_reference[m]``.  The default reference of pi (the -x
    axis) makes a 90 degree entry of ``direction_set`` point straight down
    into the rectangle from the top edge.
    """

    n_ues: int = 10
    n_aps: int = 3
    # Short-range low-power uplink default.  The common-fraction solver's
    # contraction rate degrades as the network becomes interference-limited;
    # at -16 dBm the reference 100-iteration budget reaches fairness
    # residuals far below 1e-6 on the default geometry.
    max_power: float = dbm_to_watts(-16.0)
    bandwidth: float = DEFAULT_BANDWIDTH
    noise_power: float = DEFAULT_NOISE_POWER
    carrier_freq: float = 28e9
    area_width: float = 20.0
    area_height: float = 30.0
    ap_positions: np.ndarray | None = None
    ap_boresight_reference: np.ndarray | None = None
    beamwidth_set: Sequence[float] = (math.radians(30.0), math.radians(45.0), math.radians(60.0))
    direction_set: Sequence[float] = (math.radians(80.0), math.radians(90.0), math.radians(100.0))
    ue_tx_beamwidth: float = math.radians(180.0)
    ue_tx_direction_range: tuple[float, float] = (0.0, TWO_PI)
    # The sectored surrogate keeps a substantial floor outside the cone so
    # that the rate landscape over beam configurations stays smooth enough
    # for one-shot prediction; beam choice still swings links by ~6-9 dB.
    sidelobe_gain: float = 0.7
    min_distance: float = 0.5

    def __post_init__(self):
        if self.n_ues < 1 or self.n_aps < 1:
            raise ConfigError("n_ues and n_aps must be >= 1")
        for name in ("max_power", "noise_power", "bandwidth", "carrier_freq",
                     "area_width", "area_height", "min_distance"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"{name} must be > 0")
        if not 0.0 < self.sidelobe_gain < 1.0:
            raise ConfigError("sidelobe_gain must lie in (0, 1)")
        if not 0.0 < self.ue_tx_beamwidth <= TWO_PI:
            raise ConfigError("ue_tx_beamwidth must lie in (0, 2*pi]")

        widths = _readonly(np.asarray(self.beamwidth_set))
        dirs = _readonly(np.asarray(self.direction_set))
        for name, s in (("beamwidth_set", widths), ("direction_set", dirs)):
            if s.ndim != 1 or s.size == 0:
                raise ConfigError(f"{name} must be a non-empty 1D sequence")
            if not np.all(np.diff(s) > 0.0):
                raise ConfigError(f"{name} must be strictly increasing")
            if not (np.all(s > 0.0) and np.all(s < TWO_PI)):
                raise ConfigError(f"{name} values must lie in (0, 2*pi)")
        object.__setattr__(self, "beamwidth_set", widths)
        object.__setattr__(self, "direction_set", dirs)

        pos = self.ap_positions
        if pos is None:
            pos = default_ap_positions(self.n_aps, self.area_width, self.area_height)
        pos = _readonly(np.asarray(pos))
        if pos.shape != (self.n_aps, 2):
            raise ConfigError(f"ap_positions must have shape ({self.n_aps}, 2)")
        for i in range(self.n_aps):
            for j in range(i + 1, self.n_aps):
                if np.all(pos[i] == pos[j]):
                    raise ConfigError("AP positions must be pairwise distinct")
        object.__setattr__(self, "ap_positions", pos)

        ref = self.ap_boresight_reference
        if ref is None:
            ref = np.full(self.n_aps, math.pi)
        ref = _readonly(np.atleast_1d(np.asarray(ref)))
        if ref.shape == (1,) and self.n_aps > 1:
            ref = _readonly(np.full(self.n_aps, ref[0]))
        if ref.shape != (self.n_aps,):
            raise ConfigError(f"ap_boresight_reference must have {self.n_aps} entries")
        object.__setattr__(self, "ap_boresight_reference", ref)

        lo, hi = self.ue_tx_direction_range
        if not lo <= hi:
            raise ConfigError("ue_tx_direction_range must satisfy min <= max")
        object.__setattr__(self, "ue_tx_direction_range", (float(lo), float(hi)))

    @property
    def n_beamwidths(self) -> int:
        return int(self.beamwidth_set.size)

    @property
    def n_directions(self) -> int:
        return int(self.direction_set.size)

    @property
    def n_beam_configs(self) -> int:
        """Size of the full search space over all APs."""
        return (self.n_beamwidths ** self.n_aps) * (self.n_directions ** self.n_aps)


@dataclass(frozen=True)
class Scenario:
    """UE information matrix with rows (x, y, tx_direction)."""

    d_matrix: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d_matrix, dtype=float)
        if d.ndim != 2 or d.shape[1] != 3:
            raise ConfigError("d_matrix must have shape (N, 3)")
        if not np.all(np.isfinite(d)):
            raise ConfigError("d_matrix entries must be finite")
        object.__setattr__(self, "d_matrix", _readonly(d))

    @property
    def n_ues(self) -> int:
        return self.d_matrix.shape[0]

    @property
    def positions(self) -> np.ndarray:
        return self.d_matrix[:, :2]

    @property
    def tx_directions(self) -> np.ndarray:
        return self.d_matrix[:, 2]

    def sorted(self) -> "Scenario":
        return Scenario(sort_rows(self.d_matrix))

    def is_sorted(self) -> bool:
        d = self.d_matrix
        for i in range(d.shape[0] - 1):
            if tuple(d[i]) > tuple(d[i + 1]):
                return False
        return True


def sort_rows(d: np.ndarray) -> np.ndarray:
    """Lexicographic row sort by (x, y, tx_direction), exact float compare."""
    order = np.lexsort((d[:, 2], d[:, 1], d[:, 0]))
    return d[order]


def sample_scenario_c1(cfg: NetworkConfig, rng: np.random.Generator) -> Scenario:
    """N UEs uniform over the rectangle, directions uniform over the configured range."""
    lo, hi = cfg.ue_tx_direction_range
    tx = rng.uniform(lo, hi, cfg.n_ues)
    x = rng.uniform(-cfg.area_width / 2.0, cfg.area_width / 2.0, cfg.n_ues)
    y = rng.uniform(-cfg.area_height / 2.0, cfg.area_height / 2.0, cfg.n_ues)
    return Scenario(sort_rows(np.column_stack([x, y, tx])))


def sample_scenario_c2(
    cfg: NetworkConfig,
    rng: np.random.Generator,
    center: tuple[float, float] = (0.0, 0.0),
    radius: float = 15.0,
) -> Scenario:
    """Disk sampling (uniform radius and angle) rejected into the rectangle.

    Each UE is drawn as x = cx + r cos(phi), y = cy + r sin(phi) with
    r ~ U[0, radius] and phi ~ U[0, 2*pi]; draws outside the rectangle are
    discarded and redrawn.  Raises ConfigError when the disk does not
    intersect the rectangle (rejection would never terminate).
    """
    if radius < 0.0:
        raise ConfigError("radius must be >= 0")
    cx, cy = float(center[0]), float(center[1])
    half_w, half_h = cfg.area_width / 2.0, cfg.area_height / 2.0
    # distance from the disk center to the rectangle as a point set
    dx = max(abs(cx) - half_w, 0.0)
    dy = max(abs(cy) - half_h, 0.0)
    if math.hypot(dx, dy) > radius:
        raise ConfigError("disk does not intersect the rectangle area")

    lo, hi = cfg.ue_tx_direction_range
    tx = rng.uniform(lo, hi, cfg.n_ues)

    accepted_x = np.empty(cfg.n_ues)
    accepted_y = np.empty(cfg.n_ues)
    n_found = 0
    n_drawn = 0
    while n_found < cfg.n_ues:
        chunk = max(2 * (cfg.n_ues - n_found), 64)
        r = rng.uniform(0.0, radius, chunk)
        phi = rng.uniform(0.0, TWO_PI, chunk)
        x = cx + r * np.cos(phi)
        y = cy + r * np.sin(phi)
        ok = (np.abs(x) <= half_w) & (np.abs(y) <= half_h)
        take = min(int(ok.sum()), cfg.n_ues - n_found)
        idx = np.nonzero(ok)[0][:take]
        accepted_x[n_found:n_found + take] = x[idx]
        accepted_y[n_found:n_found + take] = y[idx]
        n_found += take
        n_drawn += chunk
        if n_drawn > _MAX_REJECTION_DRAWS * cfg.n_ues:
            raise RuntimeError("rejection sampling made no progress; disk barely touches the area")
    return Scenario(sort_rows(np.column_stack([accepted_x, accepted_y, tx])))


@dataclass(frozen=True)
class BeamConfig:
    """One receive beam tuple: per-AP beam width and direction, members of the discrete sets."""

    rx_beamwidths: tuple[float, ...]
    rx_directions: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "rx_beamwidths", tuple(float(v) for v in self.rx_beamwidths))
        object.__setattr__(self, "rx_directions", tuple(float(v) for v in self.rx_directions))
        if len(self.rx_beamwidths) != len(self.rx_directions):
            raise ConfigError("rx_beamwidths and rx_directions must have equal length")

    @property
    def n_aps(self) -> int:
        return len(self.rx_beamwidths)


def _value_index(value: float, ordered_set: np.ndarray, name: str) -> int:
    hits = np.nonzero(ordered_set == value)[0]
    if hits.size != 1:
        raise ConfigError(f"{value!r} is not a member of {name}")
    return int(hits[0])


def beam_config_indices(cfg: NetworkConfig, q: BeamConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-AP indices of q's entries in the discrete sets (exact membership)."""
    if q.n_aps != cfg.n_aps:
        raise ConfigError(f"beam config has {q.n_aps} APs, expected {cfg.n_aps}")
    wi = np.array([_value_index(v, cfg.beamwidth_set, "beamwidth_set") for v in q.rx_beamwidths])
    di = np.array([_value_index(v, cfg.direction_set, "direction_set") for v in q.rx_directions])
    return wi, di


def beam_config_from_indices(cfg: NetworkConfig, width_idx: Sequence[int], dir_idx: Sequence[int]) -> BeamConfig:
    wi = np.asarray(width_idx, dtype=int)
    di = np.asarray(dir_idx, dtype=int)
    if wi.shape != (cfg.n_aps,) or di.shape != (cfg.n_aps,):
        raise ConfigError("index vectors must have one entry per AP")
    if np.any(wi < 0) or np.any(wi >= cfg.n_beamwidths):
        raise ConfigError("beam width index out of range")
    if np.any(di < 0) or np.any(di >= cfg.n_directions):
        raise ConfigError("beam direction index out of range")
    return BeamConfig(tuple(cfg.beamwidth_set[wi]), tuple(cfg.direction_set[di]))


def canonical_index(cfg: NetworkConfig, q: BeamConfig) -> int:
    """Position of q in the canonical enumeration (width digits high, direction digits low)."""
    wi, di = beam_config_indices(cfg, q)
    idx = 0
    for d in wi:
        idx = idx * cfg.n_beamwidths + int(d)
    for d in di:
        idx = idx * cfg.n_directions + int(d)
    return idx


def beam_config_digit_grids(cfg: NetworkConfig) -> tuple[np.ndarray, np.ndarray]:
    """Index digits of every config in canonical order.

    Returns (width_idx, dir_idx), both of shape (|Q|, M); row k holds the
    per-AP set indices of the k-th config of enumerate_beam_configs.
    """
    n = cfg.n_beam_configs
    idx = np.arange(n)
    m = cfg.n_aps
    dir_idx = np.empty((n, m), dtype=int)
    width_idx = np.empty((n, m), dtype=int)
    for j in range(m - 1, -1, -1):
        dir_idx[:, j] = idx % cfg.n_directions
        idx //= cfg.n_directions
    for j in range(m - 1, -1, -1):
        width_idx[:, j] = idx % cfg.n_beamwidths
        idx //= cfg.n_beamwidths
    return width_idx, dir_idx


def enumerate_beam_configs(cfg: NetworkConfig) -> Iterator[BeamConfig]:
    """All |D_theta|^M * |D_beta|^M beam configs in canonical mixed-radix order."""
    width_idx, dir_idx = beam_config_digit_grids(cfg)
    for wi, di in zip(width_idx, dir_idx):
        yield BeamConfig(tuple(cfg.beamwidth_set[wi]), tuple(cfg.direction_set[di]))


# --------------------------------------------------------------------------
# UTF-8 key-value configuration files (angles in degrees)
# --------------------------------------------------------------------------

_ANGLE_SCALARS = ("ue_tx_beamwidth",)
_ANGLE_LISTS = ("ap_boresight_reference", "beamwidth_set", "direction_set", "ue_tx_direction_range")
_INT_FIELDS = ("n_ues", "n_aps")
_FLOAT_FIELDS = ("max_power", "bandwidth", "noise_power", "carrier_freq",
                 "area_width", "area_height", "sidelobe_gain", "min_distance")


def angle_to_degrees(rad: float) -> float:
    """Degree value for storage, snapped so that radians(result) == rad.

    Snapping succeeds for values that originated from round decimal degrees;
    otherwise the plain conversion is returned and reconversion may differ
    from rad by one ulp.
    """
    deg = math.degrees(rad)
    for ndigits in range(13):
        cand = round(deg, ndigits)
        if math.radians(cand) == rad:
            return cand
    return deg


def format_angle_deg(rad: float) -> str:
    return repr(angle_to_degrees(rad))


def network_config_to_text(cfg: NetworkConfig) -> str:
    """Serialize to the key-value file format (angles converted to degrees)."""
    lines = ["# fairbeam network configuration (angles in degrees)"]
    for name in _INT_FIELDS:
        lines.append(f"{name} = {getattr(cfg, name)}")
    for name in _FLOAT_FIELDS:
        lines.append(f"{name} = {getattr(cfg, name)!r}")
    pos = "; ".join(f"{float(p[0])!r},{float(p[1])!r}" for p in cfg.ap_positions)
    lines.append(f"ap_positions = {pos}")
    for name in _ANGLE_LISTS:
        vals = ", ".join(format_angle_deg(v) for v in np.atleast_1d(getattr(cfg, name)))
        lines.append(f"{name} = {vals}")
    for name in _ANGLE_SCALARS:
        lines.append(f"{name} = {format_angle_deg(getattr(cfg, name))}")
    return "\n".join(lines) + "\n"


def save_network_config(cfg: NetworkConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(network_config_to_text(cfg))


def _parse_float_list(text: str, key: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse value list for {key!r}: {text!r}") from exc


def load_network_config(path) -> NetworkConfig:
    """Parse a key-value config file; missing keys fall back to defaults."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    kwargs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in _INT_FIELDS:
            kwargs[key] = int(value)
        elif key in _FLOAT_FIELDS:
            kwargs[key] = float(value)
        elif key in _ANGLE_SCALARS:
            kwargs[key] = math.radians(float(value))
        elif key in _ANGLE_LISTS:
            vals = [math.radians(v) for v in _parse_float_list(value, key)]
            kwargs[key] = tuple(vals)
        elif key == "ap_positions":
            pairs = []
            for tok in value.split(";"):
                tok = tok.strip()
                if not tok:
                    continue
                xy = _parse_float_list(tok, key)
                if len(xy) != 2:
                    raise ConfigError(f"line {lineno}: ap position {tok!r} is not an x,y pair")
                pairs.append(xy)
            kwargs[key] = np.asarray(pairs)
        else:
            raise ConfigError(f"line {lineno}: unknown configuration key {key!r}")
    if "ue_tx_direction_range" in kwargs:
        rng_vals = kwargs["ue_tx_direction_range"]
        if len(rng_vals) != 2:
            raise ConfigError("ue_tx_direction_range must have exactly two entries")
        kwargs["ue_tx_direction_range"] = (rng_vals[0], rng_vals[1])
    return NetworkConfig(**kwargs)
