"""Synthetic narrowband channel and short-term RSS estimation.

Physical picture: a transmitter somewhere in a 3-D region emits a
unit-power complex tone; M static receiver channels observe it through a
log-distance path-loss channel with frozen log-normal shadowing, plus
circular white Gaussian noise.  Each channel estimates the received
signal strength (RSS) by averaging the squared magnitude of a short
window of N_s baseband samples, so the estimate fluctuates around the
true RSS; that fluctuation is the whole point of the exercise.

All powers are in dBm (dB relative to 1 mW); sample amplitudes are in
sqrt(mW).  Every operation is pure given its inputs and seed.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegeneratePowerError
from .seeding import SeedLike, as_seed_sequence

# Magic + header layout of the optional binary window dump.
_WINDOW_MAGIC = b"RSSW"
_WINDOW_HEADER = struct.Struct("<4sIII")  # magic, N_s, receiver id, location id


def db_to_linear(power_db: float) -> float:
    """dBm -> mW. -inf maps to exactly 0."""
    if power_db == -math.inf:
        return 0.0
    return 10.0 ** (power_db / 10.0)


def linear_to_db(power_linear: float) -> float:
    """mW -> dBm."""
    return 10.0 * math.log10(power_linear)


@dataclass(frozen=True)
class ScenarioConfig:
    """Parameters for the synthetic measurement scenario.

    The default receiver layout mimics a small campaign: four groups of
    four antennas each (16 channels), the antennas of a group packed
    within ~0.1 m so they see nearly the same path, the groups placed at
    standoff distance around the transmitter region.

    ``gain_drift_std_db`` models per-transmission receiver gain drift
    (AGC/oscillator wander between windows).  One offset is drawn per
    window per receiver *group*, where groups are connected components of
    receivers closer than ``gain_group_radius_m``; antennas sharing an RF
    enclosure drift together, distant receivers drift independently.
    Zero disables the effect.
    """

    n_locations: int = 52
    region: tuple[tuple[float, float], ...] = ((0.0, 6.0), (0.0, 5.0), (0.5, 1.5))
    receiver_positions: tuple[tuple[float, float, float], ...] | None = None
    n_receiver_groups: int = 4
    antennas_per_group: int = 4
    receiver_standoff_m: float = 12.0
    antenna_spacing_m: float = 0.05
    antenna_height_m: float = 2.0
    path_loss_exponent: float = 2.5
    reference_loss_db: float = 40.0
    shadowing_std_db: float = 6.0
    noise_dbm: float = -90.0
    tx_power_dbm: float = 0.0
    gain_drift_std_db: float = 0.0
    gain_group_radius_m: float = 0.5
    ts_seconds: float = 5e-8
    tone_cycles_per_sample: float = 0.25


@dataclass(frozen=True)
class Scenario:
    """Frozen realization of a synthetic scenario.

    ``shadowing_db[n, m]`` is the shadowing draw for (location n, channel
    m); it is part of the geometry and never redrawn per window.
    ``receiver_group[m]`` labels the gain-drift group of channel m.
    """

    config: ScenarioConfig
    locations: np.ndarray  # (L, 3) meters
    receivers: np.ndarray  # (M, 3) meters
    shadowing_db: np.ndarray  # (L, M)
    receiver_group: np.ndarray  # (M,) int
    seed: int

    @property
    def n_locations(self) -> int:
        return self.locations.shape[0]

    @property
    def n_channels(self) -> int:
        return self.receivers.shape[0]


@dataclass(frozen=True)
class SampleWindow:
    """One short record of complex baseband samples at one channel."""

    location_id: int
    receiver_id: int
    samples: np.ndarray  # complex128, length N_s
    ts_seconds: float

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class TrueRssVector:
    """Per-channel RSS of signal plus noise, in dBm."""

    location_id: int
    values_db: np.ndarray  # (M,)


def _validate_config(config: ScenarioConfig) -> None:
    if config.n_locations < 2:
        raise ConfigError(f"n_locations must be >= 2, got {config.n_locations}")
    if len(config.region) != 3 or any(len(ax) != 2 for ax in config.region):
        raise ConfigError("region must be three (low, high) axis bounds")
    for axis, (lo, hi) in zip("xyz", config.region):
        if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
            raise ConfigError(f"region {axis} bounds must satisfy low < high, got ({lo}, {hi})")
    if config.receiver_positions is None:
        if config.n_receiver_groups < 1:
            raise ConfigError(f"n_receiver_groups must be >= 1, got {config.n_receiver_groups}")
        if config.antennas_per_group < 1:
            raise ConfigError(f"antennas_per_group must be >= 1, got {config.antennas_per_group}")
        if config.receiver_standoff_m <= 0:
            raise ConfigError(f"receiver_standoff_m must be > 0, got {config.receiver_standoff_m}")
        if config.antenna_spacing_m <= 0:
            raise ConfigError(f"antenna_spacing_m must be > 0, got {config.antenna_spacing_m}")
    elif len(config.receiver_positions) < 1:
        raise ConfigError("receiver_positions must contain at least one receiver")
    if config.path_loss_exponent <= 0:
        raise ConfigError(f"path_loss_exponent must be > 0, got {config.path_loss_exponent}")
    if config.shadowing_std_db < 0:
        raise ConfigError(f"shadowing_std_db must be >= 0, got {config.shadowing_std_db}")
    if config.gain_drift_std_db < 0:
        raise ConfigError(f"gain_drift_std_db must be >= 0, got {config.gain_drift_std_db}")
    if config.gain_group_radius_m < 0:
        raise ConfigError(f"gain_group_radius_m must be >= 0, got {config.gain_group_radius_m}")
    if config.ts_seconds <= 0:
        raise ConfigError(f"ts_seconds must be > 0, got {config.ts_seconds}")


def _default_receiver_layout(config: ScenarioConfig) -> np.ndarray:
    """Square micro-arrays at standoff distance around the region center."""
    bounds = np.asarray(config.region, dtype=float)
    cx, cy = bounds[0].mean(), bounds[1].mean()
    d = config.receiver_standoff_m
    group_centers = [(cx - d, cy - d), (cx + d, cy - d), (cx - d, cy + d), (cx + d, cy + d)]
    while len(group_centers) < config.n_receiver_groups:
        # additional groups spread along +x
        k = len(group_centers)
        group_centers.append((cx + d * (1 + k / 4.0), cy))
    group_centers = group_centers[: config.n_receiver_groups]

    s = config.antenna_spacing_m
    offsets = [(-s / 2, -s / 2), (s / 2, -s / 2), (-s / 2, s / 2), (s / 2, s / 2)]
    positions = []
    for gx, gy in group_centers:
        for a in range(config.antennas_per_group):
            ox, oy = offsets[a % 4]
            oz = s * (a // 4)  # stack extra antennas vertically
            positions.append((gx + ox, gy + oy, config.antenna_height_m + oz))
    return np.asarray(positions, dtype=float)


def _group_receivers(receivers: np.ndarray, radius: float) -> np.ndarray:
    """Connected components of receivers under pairwise distance <= radius."""
    m = receivers.shape[0]
    labels = np.full(m, -1, dtype=np.int64)
    dist = np.linalg.norm(receivers[:, None, :] - receivers[None, :, :], axis=2)
    next_label = 0
    for i in range(m):
        if labels[i] >= 0:
            continue
        stack = [i]
        labels[i] = next_label
        while stack:
            j = stack.pop()
            for k in np.nonzero((dist[j] <= radius) & (labels < 0))[0]:
                labels[k] = next_label
                stack.append(int(k))
        next_label += 1
    return labels


def generate_scenario(config: ScenarioConfig, seed: int) -> Scenario:
    """Place transmitter locations uniformly in the region and freeze the channel.

    Deterministic given ``seed``.  Exact duplicate locations are redrawn
    (a measure-zero event for continuous draws, but the pairwise-distinct
    invariant is hard).
    """
    _validate_config(config)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    bounds = np.asarray(config.region, dtype=float)

    locations = rng.uniform(bounds[:, 0], bounds[:, 1], size=(config.n_locations, 3))
    while True:
        _, first = np.unique(locations, axis=0, return_index=True)
        if first.size == config.n_locations:
            break
        dup = np.setdiff1d(np.arange(config.n_locations), first)
        locations[dup] = rng.uniform(bounds[:, 0], bounds[:, 1], size=(dup.size, 3))

    if config.receiver_positions is not None:
        receivers = np.asarray(config.receiver_positions, dtype=float).reshape(-1, 3)
    else:
        receivers = _default_receiver_layout(config)

    dists = np.linalg.norm(locations[:, None, :] - receivers[None, :, :], axis=2)
    if np.any(dists == 0.0):
        raise ConfigError("receiver_positions: a receiver coincides with a transmitter location")

    shadowing = rng.normal(0.0, config.shadowing_std_db, size=(config.n_locations, receivers.shape[0]))
    groups = _group_receivers(receivers, config.gain_group_radius_m)
    return Scenario(
        config=config,
        locations=locations,
        receivers=receivers,
        shadowing_db=shadowing,
        receiver_group=groups,
        seed=seed,
    )


def _check_ids(scenario: Scenario, location_id: int, receiver_id: int | None = None) -> None:
    if not 0 <= location_id < scenario.n_locations:
        raise KeyError(f"unknown location id {location_id}")
    if receiver_id is not None and not 0 <= receiver_id < scenario.n_channels:
        raise KeyError(f"unknown receiver id {receiver_id}")


def received_power_dbm(scenario: Scenario, location_id: int, receiver_id: int) -> float:
    """Signal-only received power: tx - loss(d) + shadowing, in dBm."""
    _check_ids(scenario, location_id, receiver_id)
    cfg = scenario.config
    d = float(np.linalg.norm(scenario.locations[location_id] - scenario.receivers[receiver_id]))
    return (
        cfg.tx_power_dbm
        - cfg.reference_loss_db
        - 10.0 * cfg.path_loss_exponent * math.log10(d)
        + float(scenario.shadowing_db[location_id, receiver_id])
    )


def true_rss(scenario: Scenario, location_id: int) -> TrueRssVector:
    """Expected RSS of signal plus noise per channel, in dBm.

    Signal and noise powers add linearly (they are uncorrelated), so
    f_m = 10*log10(10^(P_rx,m/10) + 10^(noise/10)).
    """
    _check_ids(scenario, location_id)
    m = scenario.n_channels
    noise_lin = db_to_linear(scenario.config.noise_dbm)
    values = np.empty(m)
    for rx in range(m):
        sig_lin = db_to_linear(received_power_dbm(scenario, location_id, rx))
        values[rx] = linear_to_db(sig_lin + noise_lin)
    return TrueRssVector(location_id=location_id, values_db=values)


def draw_sample_window(
    scenario: Scenario,
    location_id: int,
    receiver_id: int,
    n_samples: int,
    seed: SeedLike,
    extra_gain_db: float = 0.0,
) -> SampleWindow:
    """Draw one window of complex baseband samples, r[k] = h*x[k] + v[k].

    x[k] is a unit-power complex tone at the configured discrete
    frequency with a random initial phase; |h|^2 equals the linear
    received signal power (shifted by ``extra_gain_db``, the hook used
    for per-window receiver gain drift); v[k] is i.i.d. circular
    Gaussian at the configured noise power.  Deterministic given seed.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    _check_ids(scenario, location_id, receiver_id)
    rng = np.random.default_rng(seed)
    cfg = scenario.config

    p_rx = received_power_dbm(scenario, location_id, receiver_id) + extra_gain_db
    amplitude = math.sqrt(db_to_linear(p_rx))
    phase = rng.uniform(0.0, 2.0 * math.pi)
    k = np.arange(n_samples)
    tone = amplitude * np.exp(1j * (2.0 * math.pi * cfg.tone_cycles_per_sample * k + phase))

    noise_power = db_to_linear(cfg.noise_dbm)
    if noise_power > 0.0:
        scale = math.sqrt(noise_power / 2.0)
        noise = scale * (rng.standard_normal(n_samples) + 1j * rng.standard_normal(n_samples))
    else:
        noise = 0.0
    return SampleWindow(
        location_id=location_id,
        receiver_id=receiver_id,
        samples=tone + noise,
        ts_seconds=cfg.ts_seconds,
    )


def estimate_rss(window: SampleWindow) -> float:
    """Short-term RSS estimate: 10*log10 of the mean squared magnitude.

    The mean (rather than the bare sum) makes the estimate converge to
    the true RSS as the window grows instead of drifting by
    10*log10(N_s).
    """
    power = float(np.mean(np.abs(window.samples) ** 2))
    if power == 0.0:
        raise DegeneratePowerError(
            f"all-zero sample window (location {window.location_id}, "
            f"receiver {window.receiver_id}); RSS in dB is undefined"
        )
    return linear_to_db(power)


def estimate_rss_vector(
    scenario: Scenario, location_id: int, n_samples: int, seed: SeedLike
) -> np.ndarray:
    """One RSS vector estimate: every channel measured once, in dBm.

    The transmitter position is held fixed across the M windows; noise
    streams are independent per channel.  If the scenario has nonzero
    gain drift, one offset per receiver group is drawn for this estimate
    and applied to all windows of that group.
    """
    _check_ids(scenario, location_id)
    m = scenario.n_channels
    children = as_seed_sequence(seed).spawn(m + 1)

    cfg = scenario.config
    n_groups = int(scenario.receiver_group.max()) + 1
    if cfg.gain_drift_std_db > 0.0:
        drift_rng = np.random.default_rng(children[0])
        drift = drift_rng.normal(0.0, cfg.gain_drift_std_db, size=n_groups)
    else:
        drift = np.zeros(n_groups)

    values = np.empty(m)
    for rx in range(m):
        window = draw_sample_window(
            scenario,
            location_id,
            rx,
            n_samples,
            seed=children[rx + 1],
            extra_gain_db=float(drift[scenario.receiver_group[rx]]),
        )
        values[rx] = estimate_rss(window)
    return values


def simulate_measurement_set(
    scenario: Scenario, n_estimates: int, n_samples: int, seed: int
):
    """Full synthetic campaign: E independent RSS vector estimates per location.

    Returns a :class:`rssdetect.dataset.MeasurementSet` with location ids
    0..L-1 and the scenario's transmitter coordinates attached.
    """
    from .dataset import MeasurementSet  # local import to keep dataset free of this module

    if n_estimates < 2:
        raise ConfigError(f"n_estimates must be >= 2, got {n_estimates}")
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(scenario.n_locations * n_estimates)
    values = np.empty((scenario.n_locations, n_estimates, scenario.n_channels))
    for n in range(scenario.n_locations):
        for j in range(n_estimates):
            values[n, j] = estimate_rss_vector(
                scenario, n, n_samples, seed=children[n * n_estimates + j]
            )
    return MeasurementSet(
        values=values,
        location_ids=np.arange(scenario.n_locations, dtype=np.int64),
        coordinates=scenario.locations.copy(),
    )


def write_sample_window(window: SampleWindow, path) -> None:
    """Binary dump: 16-byte header, then interleaved float32 (I, Q) pairs."""
    header = _WINDOW_HEADER.pack(
        _WINDOW_MAGIC, window.n_samples, window.receiver_id, window.location_id
    )
    iq = np.empty(2 * window.n_samples, dtype="<f4")
    iq[0::2] = window.samples.real
    iq[1::2] = window.samples.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(iq.tobytes())


def read_sample_window(path, ts_seconds: float) -> SampleWindow:
    """Read a window written by :func:`write_sample_window`.

    The header does not carry the sampling interval, so it must be
    supplied by the caller.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _WINDOW_HEADER.size:
        raise ValueError(f"{path}: truncated window file")
    magic, n_samples, receiver_id, location_id = _WINDOW_HEADER.unpack_from(raw)
    if magic != _WINDOW_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    body = np.frombuffer(raw, dtype="<f4", offset=_WINDOW_HEADER.size)
    if body.size != 2 * n_samples:
        raise ValueError(f"{path}: expected {2 * n_samples} floats, found {body.size}")
    samples = body[0::2].astype(np.float64) + 1j * body[1::2].astype(np.float64)
    return SampleWindow(
        location_id=int(location_id),
        receiver_id=int(receiver_id),
        samples=samples,
        ts_seconds=ts_seconds,
    )
