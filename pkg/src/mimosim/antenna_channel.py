"""Uniform planar arrays, antenna-port virtualization and a synthetic
geometric frequency-domain channel.

Arrays are dual- or single-polarized UPAs.  Digital processing operates on
antenna ports; each port is a disjoint, contiguous, co-polarized sub-array
of elements sharing one analog beam weight vector (sub-array partition
virtualization).  Element index order is polarization-major, then
row-major: ``index = pol * rows * cols + row * cols + col``.  Port index
order matches the codebook's beam layout: polarization-major, horizontal
next, vertical fastest: ``port = pol * nH * nV + h * nV + v``.

The channel is a documented synthetic substitute for a full stochastic
geometry model: a small number of clusters with exponentially decaying
power, Gaussian angle spread around the line-of-sight direction, uniform
excess delays, a deterministic Ricean LOS ray, and a 2x2 per-cluster
polarization coupling with fixed XPR leakage.  It preserves frequency
selectivity, spatial correlation and rank behavior at desk scale; every
constant is overridable through :class:`ChannelModelParams`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .codebook_tables import SUPPORTED_N1_N2
from .matarr import ComplexMatrixArray

__all__ = [
    "ArrayGeometry",
    "PortConfig",
    "PortConfigError",
    "LinkGeometry",
    "ChannelModelParams",
    "ClusterState",
    "ElementChannel",
    "ChannelRealization",
    "LinkChannelState",
    "validate_port_config",
    "element_to_port_map",
    "steering_vector",
    "generate_channel",
    "apply_txru",
    "pathloss_uma_db",
    "los_probability_uma",
    "los_direction",
]

SPEED_OF_LIGHT = 299_792_458.0


class PortConfigError(ValueError):
    """Raised when a port configuration cannot be mapped onto an array."""


@dataclass(frozen=True)
class ArrayGeometry:
    """Physical UPA: per-polarization element grid plus placement."""

    num_rows: int
    num_cols: int
    dual_polarized: bool
    element_spacing_h: float = 0.5  # wavelengths
    element_spacing_v: float = 0.5
    bearing_deg: float = 0.0
    height_m: float = 0.0

    @property
    def polarization_slants_deg(self) -> tuple[float, ...]:
        return (0.0, 90.0) if self.dual_polarized else (0.0,)

    @property
    def num_polarizations(self) -> int:
        return 2 if self.dual_polarized else 1

    @property
    def total_elements(self) -> int:
        return self.num_rows * self.num_cols * self.num_polarizations

    def element_positions(self) -> np.ndarray:
        """(total_elements, 3) positions in wavelengths, array plane normal to
        the bearing direction; both polarizations overlap in space."""
        b = math.radians(self.bearing_deg)
        y_local = np.array([-math.sin(b), math.cos(b), 0.0])
        z_axis = np.array([0.0, 0.0, 1.0])
        rows = np.arange(self.num_rows)[:, None] * self.element_spacing_v
        cols = np.arange(self.num_cols)[None, :] * self.element_spacing_h
        grid = rows[..., None] * z_axis + cols[..., None] * y_local  # (R, C, 3)
        single = grid.reshape(-1, 3)
        return np.tile(single, (self.num_polarizations, 1))

    def element_slants_deg(self) -> np.ndarray:
        per_pol = self.num_rows * self.num_cols
        return np.repeat(self.polarization_slants_deg, per_pol)


@dataclass(frozen=True)
class PortConfig:
    """Logical antenna-port grid (per polarization) on top of an array."""

    n_h: int
    n_v: int
    dual_polarized: bool

    @property
    def num_ports(self) -> int:
        return self.n_h * self.n_v * (2 if self.dual_polarized else 1)


def validate_port_config(cfg: PortConfig, geom: ArrayGeometry) -> int:
    """Check a port config against an array; returns the port count."""
    if cfg.n_h < 1 or cfg.n_v < 1:
        raise PortConfigError(f"port counts must be positive, got ({cfg.n_h}, {cfg.n_v})")
    if cfg.dual_polarized != geom.dual_polarized:
        raise PortConfigError("port config and array geometry disagree on polarization")
    if geom.num_cols % cfg.n_h != 0:
        raise PortConfigError(f"nH={cfg.n_h} does not divide numCols={geom.num_cols}")
    if geom.num_rows % cfg.n_v != 0:
        raise PortConfigError(f"nV={cfg.n_v} does not divide numRows={geom.num_rows}")
    if cfg.dual_polarized and (cfg.n_h, cfg.n_v) not in SUPPORTED_N1_N2:
        raise PortConfigError(
            f"(nH, nV) = ({cfg.n_h}, {cfg.n_v}) is not a supported dual-polarized layout"
        )
    return cfg.num_ports


def element_to_port_map(cfg: PortConfig, geom: ArrayGeometry) -> list[np.ndarray]:
    """Element index sets per port (a partition of all elements).

    Port p covers the co-polarized contiguous (rows/nV) x (cols/nH)
    rectangle at grid position (h, v) of polarization ``pol``, with
    ``p = pol * nH * nV + h * nV + v``.
    """
    validate_port_config(cfg, geom)
    rows_per_port = geom.num_rows // cfg.n_v
    cols_per_port = geom.num_cols // cfg.n_h
    per_pol = geom.num_rows * geom.num_cols
    ports = []
    for pol in range(geom.num_polarizations):
        for h in range(cfg.n_h):
            for v in range(cfg.n_v):
                rr = np.arange(v * rows_per_port, (v + 1) * rows_per_port)
                cc = np.arange(h * cols_per_port, (h + 1) * cols_per_port)
                idx = (pol * per_pol + rr[:, None] * geom.num_cols + cc[None, :]).ravel()
                ports.append(idx)
    return ports


def _direction_unit(azimuth_deg: float, zenith_deg: float) -> np.ndarray:
    az, zen = math.radians(azimuth_deg), math.radians(zenith_deg)
    return np.array(
        [math.sin(zen) * math.cos(az), math.sin(zen) * math.sin(az), math.cos(zen)]
    )


def steering_vector(geom: ArrayGeometry, azimuth_deg: float, zenith_deg: float) -> np.ndarray:
    """Unit-magnitude element phase vector for a plane wave from (az, zen)."""
    u = _direction_unit(azimuth_deg, zenith_deg)
    phase = 2.0 * math.pi * (geom.element_positions() @ u)
    return np.exp(1j * phase)


def los_direction(from_pos: np.ndarray, to_pos: np.ndarray) -> tuple[float, float]:
    """(azimuth, zenith) in degrees of the straight ray from -> to."""
    d = np.asarray(to_pos, float) - np.asarray(from_pos, float)
    r = np.linalg.norm(d)
    if r == 0:
        raise ValueError("positions coincide")
    az = math.degrees(math.atan2(d[1], d[0]))
    zen = math.degrees(math.acos(np.clip(d[2] / r, -1.0, 1.0)))
    return az, zen


# ----------------------------------------------------------------------
# Link geometry, pathloss, LOS state
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class LinkGeometry:
    tx_position: tuple[float, float, float]
    rx_position: tuple[float, float, float]
    carrier_frequency_hz: float
    n_rb: int
    rb_bandwidth_hz: float

    def __post_init__(self):
        if tuple(self.tx_position) == tuple(self.rx_position):
            raise ValueError("tx and rx positions must be distinct")
        if self.n_rb < 1:
            raise ValueError("n_rb must be >= 1")

    @property
    def distance_3d_m(self) -> float:
        d = np.asarray(self.rx_position, float) - np.asarray(self.tx_position, float)
        return float(np.linalg.norm(d))

    @property
    def distance_2d_m(self) -> float:
        d = np.asarray(self.rx_position[:2], float) - np.asarray(self.tx_position[:2], float)
        return float(np.linalg.norm(d))

    def rb_frequencies_hz(self) -> np.ndarray:
        offsets = (np.arange(self.n_rb) - (self.n_rb - 1) / 2.0) * self.rb_bandwidth_hz
        return self.carrier_frequency_hz + offsets


def pathloss_uma_db(link: LinkGeometry, los: bool) -> float:
    """Urban-macro pathloss, deterministic (no shadow fading).

    LOS:  28.0 + 22 log10(d3D) + 20 log10(fc / 1 GHz)
    NLOS: max(LOS, 13.54 + 39.08 log10(d3D) + 20 log10(fc / 1 GHz)
               - 0.6 (hUE - 1.5))
    """
    d3d = link.distance_3d_m
    if d3d <= 0:
        raise ValueError("3D distance must be positive")
    fc_ghz = link.carrier_frequency_hz / 1e9
    pl_los = 28.0 + 22.0 * math.log10(d3d) + 20.0 * math.log10(fc_ghz)
    if los:
        return pl_los
    h_ue = min(link.tx_position[2], link.rx_position[2])
    pl_nlos = 13.54 + 39.08 * math.log10(d3d) + 20.0 * math.log10(fc_ghz) - 0.6 * (h_ue - 1.5)
    return max(pl_los, pl_nlos)


def los_probability_uma(d2d_m: float) -> float:
    """Urban-macro LOS probability for UE heights <= 13 m."""
    if d2d_m <= 18.0:
        return 1.0
    return 18.0 / d2d_m + math.exp(-d2d_m / 63.0) * (1.0 - 18.0 / d2d_m)


# ----------------------------------------------------------------------
# Synthetic geometric channel
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ChannelModelParams:
    """Knobs of the synthetic cluster channel (all overridable)."""

    cluster_count: int = 10
    decay_db_per_cluster: float = 3.0
    azimuth_spread_deg: float = 20.0
    zenith_spread_deg: float = 5.0
    delay_spread_max_ns: float = 300.0
    rice_k_db: float = 9.0
    xpr_db: float = 8.0


@dataclass
class ClusterState:
    """Drawn cluster parameters of one realization."""

    powers: np.ndarray  # (L,), sums to 1
    delays_s: np.ndarray  # (L,)
    tx_azimuth_deg: np.ndarray
    tx_zenith_deg: np.ndarray
    rx_azimuth_deg: np.ndarray
    rx_zenith_deg: np.ndarray
    co_phase: np.ndarray  # (L,) unit-magnitude complex
    cross_phase: np.ndarray
    los: bool


@dataclass
class ElementChannel:
    """Element-level channel (rxElems x txElems x nRB) plus its cluster draw."""

    h_elem: ComplexMatrixArray
    clusters: ClusterState


@dataclass
class ChannelRealization:
    """Port-level channel (rxPorts x txPorts x nRB) after virtualization."""

    port_channel: ComplexMatrixArray
    generated_at_ms: float
    cluster_state: ClusterState


def _draw_clusters(
    link: LinkGeometry, rng: np.random.Generator, params: ChannelModelParams, los: bool
) -> ClusterState:
    l = params.cluster_count
    tx_az0, tx_zen0 = los_direction(link.tx_position, link.rx_position)
    rx_az0, rx_zen0 = los_direction(link.rx_position, link.tx_position)
    prop_delay = link.distance_3d_m / SPEED_OF_LIGHT

    n_random = l - 1 if (los and l > 1) else l
    decay = 10.0 ** (-params.decay_db_per_cluster * np.arange(n_random) / 10.0)
    if los:
        k = 10.0 ** (params.rice_k_db / 10.0)
        if l == 1:
            powers = np.array([1.0])
        else:
            powers = np.concatenate(([k / (k + 1.0)], decay / decay.sum() / (k + 1.0)))
    else:
        powers = decay / decay.sum()

    n = len(powers)
    tx_az = tx_az0 + rng.normal(0.0, params.azimuth_spread_deg, n)
    tx_zen = tx_zen0 + rng.normal(0.0, params.zenith_spread_deg, n)
    rx_az = rx_az0 + rng.normal(0.0, params.azimuth_spread_deg, n)
    rx_zen = rx_zen0 + rng.normal(0.0, params.zenith_spread_deg, n)
    delays = prop_delay + rng.uniform(0.0, params.delay_spread_max_ns * 1e-9, n)
    co = np.exp(2j * math.pi * rng.uniform(size=n))
    cross = np.exp(2j * math.pi * rng.uniform(size=n))
    if los:
        # First cluster is the deterministic LOS ray.
        tx_az[0], tx_zen[0] = tx_az0, tx_zen0
        rx_az[0], rx_zen[0] = rx_az0, rx_zen0
        delays[0] = prop_delay
        co[0] = 1.0
        cross[0] = 0.0
    return ClusterState(
        powers=powers,
        delays_s=delays,
        tx_azimuth_deg=tx_az,
        tx_zenith_deg=tx_zen,
        rx_azimuth_deg=rx_az,
        rx_zenith_deg=rx_zen,
        co_phase=co,
        cross_phase=cross,
        los=los,
    )


def generate_channel(
    link: LinkGeometry,
    tx_geom: ArrayGeometry,
    rx_geom: ArrayGeometry,
    rng: np.random.Generator,
    *,
    los: bool = True,
    params: ChannelModelParams = ChannelModelParams(),
) -> ElementChannel:
    """Element-level frequency-domain channel.

    H(rb) = sqrt(g_pl) * sum_l sqrt(p_l) * polcoef_l
            * a_rx(cluster arrival) a_tx(cluster departure)^T
            * exp(-j 2 pi f_rb tau_l)

    with cluster powers summing to 1 and g_pl the linear pathloss gain.
    Deterministic given the generator state.
    """
    clusters = _draw_clusters(link, rng, params, los)
    n = len(clusters.powers)
    kappa = 10.0 ** (-params.xpr_db / 20.0)

    tx_slants = np.radians(tx_geom.element_slants_deg())
    rx_slants = np.radians(rx_geom.element_slants_deg())
    delta = rx_slants[:, None] - tx_slants[None, :]  # (rxE, txE)
    cos_d, sin_d = np.cos(delta), np.sin(delta)

    rays = np.zeros((n, rx_geom.total_elements, tx_geom.total_elements), dtype=np.complex128)
    for l in range(n):
        a_rx = steering_vector(rx_geom, clusters.rx_azimuth_deg[l], clusters.rx_zenith_deg[l])
        a_tx = steering_vector(tx_geom, clusters.tx_azimuth_deg[l], clusters.tx_zenith_deg[l])
        polco = cos_d * clusters.co_phase[l] + sin_d * kappa * clusters.cross_phase[l]
        rays[l] = math.sqrt(clusters.powers[l]) * polco * np.outer(a_rx, a_tx)

    phases = np.exp(
        -2j * math.pi * link.rb_frequencies_hz()[None, :] * clusters.delays_s[:, None]
    )  # (L, nRB)
    h = np.einsum("lij,lr->rij", rays, phases)
    gain = 10.0 ** (-pathloss_uma_db(link, los) / 20.0)
    return ElementChannel(h_elem=ComplexMatrixArray.from_paged(gain * h), clusters=clusters)


def _port_weights(geom: ArrayGeometry, port_map: list[np.ndarray], beam_dir) -> np.ndarray:
    """(elements, ports) matrix of per-port unit-norm analog weights.

    All ports of a device share the same beam direction.
    """
    sv = steering_vector(geom, beam_dir[0], beam_dir[1])
    w = np.zeros((geom.total_elements, len(port_map)), dtype=np.complex128)
    for p, idx in enumerate(port_map):
        w[idx, p] = sv[idx] / math.sqrt(len(idx))
    return w


def apply_txru(
    elem_channel: ElementChannel,
    tx_map: list[np.ndarray],
    rx_map: list[np.ndarray],
    tx_beam_dir: tuple[float, float],
    rx_beam_dir: tuple[float, float],
    tx_geom: ArrayGeometry,
    rx_geom: ArrayGeometry,
    generated_at_ms: float = 0.0,
) -> ChannelRealization:
    """Collapse the element channel to ports: H_port = Wrx^H H Wtx per RB."""
    w_tx = _port_weights(tx_geom, tx_map, tx_beam_dir)
    w_rx = _port_weights(rx_geom, rx_map, rx_beam_dir)
    h = elem_channel.h_elem.paged  # (nRB, rxE, txE)
    port = np.matmul(w_rx.conj().T[None, :, :], np.matmul(h, w_tx[None, :, :]))
    return ChannelRealization(
        port_channel=ComplexMatrixArray.from_paged(port),
        generated_at_ms=generated_at_ms,
        cluster_state=elem_channel.clusters,
    )


# ----------------------------------------------------------------------
# Cadenced channel keeper
# ----------------------------------------------------------------------


@dataclass
class LinkChannelState:
    """Holds one link's channel and regenerates it on the configured cadence.

    Between updates, :meth:`at_time` returns the identical realization
    object.  The LOS state is redrawn on its own (typically equal) period.
    """

    link: LinkGeometry
    tx_geom: ArrayGeometry
    rx_geom: ArrayGeometry
    tx_port_cfg: PortConfig
    rx_port_cfg: PortConfig
    rng_channel: np.random.Generator
    rng_los: np.random.Generator
    update_period_ms: float = 100.0
    los_update_period_ms: float = 100.0
    params: ChannelModelParams = ChannelModelParams()
    amplitude_scale: float = 1.0  # folds tx power and antenna gains
    # Beam overrides for cross links: an interfering transmitter keeps its
    # analog beam on its own receiver, not on this link's endpoint.
    tx_beam_dir: tuple[float, float] | None = None
    rx_beam_dir: tuple[float, float] | None = None

    _tx_map: list = field(init=False, repr=False)
    _rx_map: list = field(init=False, repr=False)
    _tx_beam: tuple = field(init=False, repr=False)
    _rx_beam: tuple = field(init=False, repr=False)
    _realization: ChannelRealization | None = field(default=None, init=False, repr=False)
    _los_state: bool = field(default=True, init=False, repr=False)
    _last_los_ms: float = field(default=-np.inf, init=False, repr=False)

    def __post_init__(self):
        self._tx_map = element_to_port_map(self.tx_port_cfg, self.tx_geom)
        self._rx_map = element_to_port_map(self.rx_port_cfg, self.rx_geom)
        # Ideal direction-of-arrival beams: by default both ends aim at the
        # true peer of this link.
        self._tx_beam = self.tx_beam_dir or los_direction(self.link.tx_position, self.link.rx_position)
        self._rx_beam = self.rx_beam_dir or los_direction(self.link.rx_position, self.link.tx_position)

    @property
    def los(self) -> bool:
        return self._los_state

    def at_time(self, now_ms: float) -> ChannelRealization:
        if now_ms - self._last_los_ms >= self.los_update_period_ms:
            p_los = los_probability_uma(self.link.distance_2d_m)
            self._los_state = bool(self.rng_los.uniform() < p_los)
            self._last_los_ms = now_ms
        if (
            self._realization is None
            or now_ms - self._realization.generated_at_ms >= self.update_period_ms
        ):
            elem = generate_channel(
                self.link,
                self.tx_geom,
                self.rx_geom,
                self.rng_channel,
                los=self._los_state,
                params=self.params,
            )
            real = apply_txru(
                elem,
                self._tx_map,
                self._rx_map,
                self._tx_beam,
                self._rx_beam,
                self.tx_geom,
                self.rx_geom,
                generated_at_ms=now_ms,
            )
            if self.amplitude_scale != 1.0:
                real.port_channel.data *= self.amplitude_scale
            self._realization = real
        return self._realization
