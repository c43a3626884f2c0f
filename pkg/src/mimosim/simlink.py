"""Slot-driven closed-loop simulator: one gNB/UE pair (plus an optional
interfering pair), per-slot transport blocks, CSI measurement and delayed
feedback, metric accumulation and trace emission.

Per 1 ms slot the loop (a) refreshes channels on their cadence, (b) runs
the UE-side CSI measurement when the feedback scheduler fires and enqueues
the report with a K1-slot processing delay, (c) transmits one transport
block over the whole carrier using the most recently applied feedback
(dummy precoder, rank 1, MCS 0 before the first report arrives), (d)
computes the true received SINR under the applied precoder and current
interference and decides decode success, and (e) accumulates metrics.

Traffic is full-buffer by default (a TB every downlink slot); an optional
constant-bit-rate cap reproduces a throughput ceiling.  A single run is
strictly single-threaded; runs with distinct (seed, distance) cells are
independent and may execute in parallel.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .antenna_channel import (
    ArrayGeometry,
    ChannelModelParams,
    LinkChannelState,
    LinkGeometry,
    PortConfig,
    los_direction,
    validate_port_config,
)
from .codebook import Codebook
from .csi import (
    CsiFeedback,
    ExhaustivePmSearch,
    PmSearchConfig,
    codebook_factory_for_ports,
    default_beta,
    effective_sinr,
    feedback_scheduler,
    mcs_for_sinr_matrix,
    tb_decode_mimo,
    tb_size,
)
from .matarr import ComplexMatrixArray
from .mimo_sinr import (
    SignalChunk,
    add_interference,
    compute_sinr,
    constant_precoder,
    dummy_precoder,
    noise_covariance,
    whiten_channel,
)

__all__ = [
    "ScenarioConfig",
    "ConfigError",
    "Metrics",
    "SimState",
    "AggregateStats",
    "build_scenario",
    "run_slots",
    "run_scenario",
    "aggregate_runs",
    "tb_trace_csv",
    "fb_trace_csv",
    "TB_TRACE_HEADER",
    "FB_TRACE_HEADER",
]

SLOT_MS = 1.0  # numerology 0
SYMBOLS_PER_SLOT = 14
THERMAL_NOISE_DBM_HZ = -174.0


class ConfigError(ValueError):
    """Raised for invalid scenario configurations."""


@dataclass
class ScenarioConfig:
    """Full scenario parameter set; defaults follow the baseline urban-macro
    setup (4 GHz, 10 MHz / 52 RBs, 41 dBm gNB, 25 m / 1.5 m heights)."""

    carrier_frequency_hz: float = 4e9
    n_rb: int = 52
    rb_bandwidth_hz: float = 180e3
    gnb_tx_power_dbm: float = 41.0
    gnb_noise_figure_db: float = 5.0  # kept for parity; unused on the downlink
    ue_noise_figure_db: float = 7.0
    gnb_height_m: float = 25.0
    ue_height_m: float = 1.5
    gnb_bearing_deg: float = 0.0
    ue_bearing_deg: float = 180.0
    gnb_antenna_gain_dbi: float = 8.0
    ue_antenna_gain_dbi: float = 0.0
    element_spacing_h: float = 0.5
    element_spacing_v: float = 0.5
    channel_update_period_ms: float = 100.0
    los_update_period_ms: float = 100.0
    wb_pmi_update_interval_ms: float = 10.0
    sb_pmi_update_interval_ms: float = 2.0
    k1_slots: int = 2
    rank_limit: int = 4
    subband_size_rb: int = 4
    sim_duration_ms: float = 100.0
    distance_m: float = 20.0
    seed: int = 1
    enable_mimo_feedback: bool = True
    enable_interferer: bool = False
    interferer_gnb_x_m: float = 1000.0
    interferer_ue_x_m: float = 500.0
    cbr_rate_bps: float = 0.0  # 0 disables the CBR ceiling (full buffer)
    duty_factor: float = 1.0
    # antenna arrays and port grids (defaults: 16-element 8-port gNB,
    # 2-element-per-polarization 4-port UE)
    gnb_rows: int = 4
    gnb_cols: int = 2
    gnb_dual_polarized: bool = True
    gnb_ports_h: int = 2
    gnb_ports_v: int = 2
    ue_rows: int = 1
    ue_cols: int = 2
    ue_dual_polarized: bool = True
    ue_ports_h: int = 2
    ue_ports_v: int = 1
    # synthetic channel knobs
    cluster_count: int = 10
    cluster_decay_db: float = 3.0
    azimuth_spread_deg: float = 20.0
    zenith_spread_deg: float = 5.0
    delay_spread_max_ns: float = 300.0
    rice_k_db: float = 9.0
    xpr_db: float = 8.0
    eesm_beta: float = 0.0  # 0 selects the per-MCS beta rule

    # -- derived helpers -------------------------------------------------

    def gnb_geometry(self, bearing_deg: float | None = None) -> ArrayGeometry:
        return ArrayGeometry(
            num_rows=self.gnb_rows,
            num_cols=self.gnb_cols,
            dual_polarized=self.gnb_dual_polarized,
            element_spacing_h=self.element_spacing_h,
            element_spacing_v=self.element_spacing_v,
            bearing_deg=self.gnb_bearing_deg if bearing_deg is None else bearing_deg,
            height_m=self.gnb_height_m,
        )

    def ue_geometry(self, bearing_deg: float | None = None) -> ArrayGeometry:
        return ArrayGeometry(
            num_rows=self.ue_rows,
            num_cols=self.ue_cols,
            dual_polarized=self.ue_dual_polarized,
            element_spacing_h=self.element_spacing_h,
            element_spacing_v=self.element_spacing_v,
            bearing_deg=self.ue_bearing_deg if bearing_deg is None else bearing_deg,
            height_m=self.ue_height_m,
        )

    def gnb_port_config(self) -> PortConfig:
        return PortConfig(self.gnb_ports_h, self.gnb_ports_v, self.gnb_dual_polarized)

    def ue_port_config(self) -> PortConfig:
        return PortConfig(self.ue_ports_h, self.ue_ports_v, self.ue_dual_polarized)

    def channel_params(self) -> ChannelModelParams:
        return ChannelModelParams(
            cluster_count=self.cluster_count,
            decay_db_per_cluster=self.cluster_decay_db,
            azimuth_spread_deg=self.azimuth_spread_deg,
            zenith_spread_deg=self.zenith_spread_deg,
            delay_spread_max_ns=self.delay_spread_max_ns,
            rice_k_db=self.rice_k_db,
            xpr_db=self.xpr_db,
        )

    def pm_search_config(self) -> PmSearchConfig:
        return PmSearchConfig(
            rank_limit=self.rank_limit,
            wb_update_interval_ms=self.wb_pmi_update_interval_ms,
            sb_update_interval_ms=self.sb_pmi_update_interval_ms,
            subband_size_rb=self.subband_size_rb,
        )

    def noise_power_per_rb_mw(self) -> float:
        dbm = THERMAL_NOISE_DBM_HZ + 10 * math.log10(self.rb_bandwidth_hz) + self.ue_noise_figure_db
        return 10.0 ** (dbm / 10.0)

    def tx_power_per_rb_mw(self) -> float:
        return 10.0 ** (self.gnb_tx_power_dbm / 10.0) / self.n_rb

    def link_amplitude(self) -> float:
        gains = self.gnb_antenna_gain_dbi + self.ue_antenna_gain_dbi
        return math.sqrt(self.tx_power_per_rb_mw() * 10.0 ** (gains / 10.0))

    def validate(self) -> None:
        if self.distance_m <= 0:
            raise ConfigError("distance must be positive")
        if not -20.0 <= self.gnb_tx_power_dbm <= 60.0:
            raise ConfigError("gNB power out of sane bounds (-20..60 dBm)")
        if self.ue_noise_figure_db < 0 or self.gnb_noise_figure_db < 0:
            raise ConfigError("noise figures must be nonnegative")
        if self.sim_duration_ms < 0:
            raise ConfigError("simulation duration must be nonnegative")
        if self.k1_slots < 0:
            raise ConfigError("K1 must be nonnegative")
        if not 0.0 < self.duty_factor <= 1.0:
            raise ConfigError("duty factor must be in (0, 1]")
        if self.cbr_rate_bps < 0:
            raise ConfigError("CBR rate must be nonnegative")
        if self.n_rb < 1 or self.subband_size_rb < 1:
            raise ConfigError("n_rb and subband size must be >= 1")
        validate_port_config(self.gnb_port_config(), self.gnb_geometry())
        validate_port_config(self.ue_port_config(), self.ue_geometry())
        self.pm_search_config()  # interval/rank checks
        if self.cluster_count < 1:
            raise ConfigError("cluster count must be >= 1")


@dataclass
class Metrics:
    throughput_bps: float = 0.0
    avg_mcs: float = 0.0
    avg_rank: float = 0.0
    tb_count: int = 0
    tb_error_count: int = 0
    wall_clock_seconds: float = 0.0
    csi_search_count: int = 0
    wb_search_count: int = 0
    csi_search_seconds: float = 0.0


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng((seed, *key))


# stream ids per pair: channel, LOS, decode; the interference link gets its
# own ids so enabling the interferer never shifts the serving pair's draws
_STREAM_CHANNEL, _STREAM_LOS, _STREAM_DECODE = 0, 1, 2
_STREAM_INTF_CHANNEL, _STREAM_INTF_LOS = 3, 4


@dataclass
class SimState:
    cfg: ScenarioConfig
    serving: LinkChannelState
    interference: LinkChannelState | None
    intf_precoder: np.ndarray | None
    noise_per_rb_mw: float
    search: ExhaustivePmSearch
    codebook_factory: object
    rng_decode: np.random.Generator
    tb_trace: list = field(default_factory=list)
    fb_trace: list = field(default_factory=list)
    applied_feedback_ages: list = field(default_factory=list)  # (slot, generated_at_ms)


def build_scenario(cfg: ScenarioConfig) -> SimState:
    """Place nodes, instantiate channels and the search; validates cfg."""
    cfg.validate()
    gnb_pos = (0.0, 0.0, cfg.gnb_height_m)
    ue_pos = (cfg.distance_m, 0.0, cfg.ue_height_m)

    serving = LinkChannelState(
        link=LinkGeometry(gnb_pos, ue_pos, cfg.carrier_frequency_hz, cfg.n_rb, cfg.rb_bandwidth_hz),
        tx_geom=cfg.gnb_geometry(),
        rx_geom=cfg.ue_geometry(),
        tx_port_cfg=cfg.gnb_port_config(),
        rx_port_cfg=cfg.ue_port_config(),
        rng_channel=_rng(cfg.seed, 0, _STREAM_CHANNEL),
        rng_los=_rng(cfg.seed, 0, _STREAM_LOS),
        update_period_ms=cfg.channel_update_period_ms,
        los_update_period_ms=cfg.los_update_period_ms,
        params=cfg.channel_params(),
        amplitude_scale=cfg.link_amplitude(),
    )

    interference = None
    intf_precoder = None
    if cfg.enable_interferer:
        intf_gnb_pos = (cfg.interferer_gnb_x_m, 0.0, cfg.gnb_height_m)
        intf_ue_pos = (cfg.interferer_ue_x_m, 0.0, cfg.ue_height_m)
        interference = LinkChannelState(
            link=LinkGeometry(
                intf_gnb_pos, ue_pos, cfg.carrier_frequency_hz, cfg.n_rb, cfg.rb_bandwidth_hz
            ),
            tx_geom=cfg.gnb_geometry(bearing_deg=180.0),
            rx_geom=cfg.ue_geometry(),
            tx_port_cfg=cfg.gnb_port_config(),
            rx_port_cfg=cfg.ue_port_config(),
            rng_channel=_rng(cfg.seed, 1, _STREAM_INTF_CHANNEL),
            rng_los=_rng(cfg.seed, 1, _STREAM_INTF_LOS),
            update_period_ms=cfg.channel_update_period_ms,
            los_update_period_ms=cfg.los_update_period_ms,
            params=cfg.channel_params(),
            amplitude_scale=cfg.link_amplitude(),
            # The interfering gNB keeps its analog beam on its own UE; the
            # victim UE keeps its analog beam on its serving gNB.
            tx_beam_dir=los_direction(np.array(intf_gnb_pos), np.array(intf_ue_pos)),
            rx_beam_dir=los_direction(np.array(ue_pos), np.array(gnb_pos)),
        )
        # Worst-case constant interferer: fixed rank-1 dummy precoder,
        # transmitted every slot at full power.
        intf_precoder = dummy_precoder(cfg.gnb_port_config().num_ports, 1)

    factory = codebook_factory_for_ports(
        cfg.gnb_port_config().num_ports, cfg.gnb_ports_h, cfg.gnb_ports_v
    )
    search = ExhaustivePmSearch(factory, cfg.pm_search_config())
    return SimState(
        cfg=cfg,
        serving=serving,
        interference=interference,
        intf_precoder=intf_precoder,
        noise_per_rb_mw=cfg.noise_power_per_rb_mw(),
        search=search,
        codebook_factory=factory,
        rng_decode=_rng(cfg.seed, 0, _STREAM_DECODE),
    )


def _is_tx_slot(slot: int, duty: float) -> bool:
    return math.floor((slot + 1) * duty) > math.floor(slot * duty)


def _precoder_pages(cb: Codebook, fb: CsiFeedback, n_rb: int, sb_size: int) -> ComplexMatrixArray:
    """Per-RB precoder pages for an applied feedback report."""
    n_sb = len(fb.i2_per_subband)
    pages = [
        cb.precoder_at(fb.i1, fb.i2_per_subband[min(rb // sb_size, n_sb - 1)])
        for rb in range(n_rb)
    ]
    return ComplexMatrixArray.from_paged(np.stack(pages))


def run_slots(state: SimState) -> Metrics:
    """Run the closed loop; returns metrics and fills the trace buffers."""
    cfg = state.cfg
    t_start = time.perf_counter()
    n_slots = int(round(cfg.sim_duration_ms / SLOT_MS))
    n_sb = (cfg.n_rb + cfg.subband_size_rb - 1) // cfg.subband_size_rb
    tx_ports = cfg.gnb_port_config().num_ports
    beta_override = cfg.eesm_beta if cfg.eesm_beta > 0 else None

    metrics = Metrics()
    last_wb_ms = last_sb_ms = -math.inf
    last_wb_feedback: CsiFeedback | None = None
    pending: list[tuple[int, CsiFeedback]] = []
    active_fb: CsiFeedback | None = None
    active_pages: ComplexMatrixArray | None = None
    epoch = None  # identity of the cached covariance/whitening
    cov = h_norm = None
    cbr_backlog_bits = 0.0
    bits_ok = 0.0
    mcs_sum = 0.0
    rank_sum = 0.0

    for slot in range(n_slots):
        now = slot * SLOT_MS

        serving = state.serving.at_time(now)
        intf = state.interference.at_time(now) if state.interference is not None else None
        key = (id(serving), id(intf) if intf is not None else None)
        if key != epoch:
            cov = noise_covariance(state.noise_per_rb_mw, serving.port_channel.rows, cfg.n_rb)
            if intf is not None:
                cov = add_interference(
                    cov, intf.port_channel, constant_precoder(state.intf_precoder, cfg.n_rb)
                )
            h_norm = whiten_channel(serving.port_channel, cov)
            epoch = key

        # ---- UE side: CSI measurement and feedback -----------------------
        refresh_wb, refresh_sb = feedback_scheduler(
            state.search.cfg, now, last_wb_ms, last_sb_ms
        )
        if refresh_wb or refresh_sb:
            t_search = time.perf_counter()
            if cfg.enable_mimo_feedback:
                if refresh_wb or last_wb_feedback is None:
                    fb = state.search.full_search(h_norm, now)
                    last_wb_feedback = fb
                    last_wb_ms = now
                    metrics.wb_search_count += 1
                else:
                    fb = state.search.subband_refresh(h_norm, last_wb_feedback, now)
            else:
                sinr = compute_sinr(h_norm, constant_precoder(dummy_precoder(tx_ports, 1), cfg.n_rb))
                mcs, cqi, _ = mcs_for_sinr_matrix(sinr, beta_override)
                fb = CsiFeedback(
                    ri=1,
                    i1=0,
                    i2_per_subband=[0] * n_sb,
                    wb_cqi=cqi,
                    mcs=mcs,
                    tb_size_bits=tb_size(mcs, 1, cfg.n_rb),
                    generated_at_ms=now,
                )
                if refresh_wb:
                    last_wb_ms = now
                    metrics.wb_search_count += 1
            last_sb_ms = now
            metrics.csi_search_count += 1
            metrics.csi_search_seconds += time.perf_counter() - t_search
            pending.append((slot + cfg.k1_slots, fb))
            state.fb_trace.append(
                (
                    now,
                    1,
                    fb.ri,
                    fb.i1,
                    ";".join(str(x) for x in fb.i2_per_subband),
                    fb.mcs,
                    fb.tb_size_bits,
                )
            )

        # ---- gNB side: apply newest feedback due by now ------------------
        due = [f for s, f in pending if s <= slot]
        if due:
            pending = [(s, f) for s, f in pending if s > slot]
            if active_fb is not due[-1]:
                active_fb = due[-1]
                if cfg.enable_mimo_feedback:
                    active_pages = _precoder_pages(
                        state.codebook_factory(active_fb.ri), active_fb, cfg.n_rb, cfg.subband_size_rb
                    )
                else:
                    active_pages = constant_precoder(dummy_precoder(tx_ports, 1), cfg.n_rb)

        if not _is_tx_slot(slot, cfg.duty_factor):
            continue

        if active_fb is None:
            rank, mcs = 1, 0
            pages = constant_precoder(dummy_precoder(tx_ports, 1), cfg.n_rb)
        else:
            rank, mcs = active_fb.ri, active_fb.mcs
            pages = active_pages
        state.applied_feedback_ages.append(
            (slot, active_fb.generated_at_ms if active_fb is not None else -math.inf)
        )

        tb_bits = tb_size(mcs, rank, cfg.n_rb)
        if cfg.cbr_rate_bps > 0:
            cbr_backlog_bits += cfg.cbr_rate_bps * SLOT_MS / 1000.0
            tb_bits = min(tb_bits, int(cbr_backlog_bits))
            cbr_backlog_bits -= tb_bits
            if tb_bits == 0:
                continue

        # ---- receiver: true SINR under the applied precoder --------------
        sinr = compute_sinr(h_norm, pages)
        chunk = SignalChunk(sinr, SYMBOLS_PER_SLOT, cov)
        success, _ = tb_decode_mimo([chunk], mcs, rank, state.rng_decode, beta_override)
        eff = effective_sinr(
            sinr.sinr.ravel(), beta_override or default_beta(mcs)
        )
        eff_db = 10.0 * math.log10(eff) if eff > 0 else -math.inf

        metrics.tb_count += 1
        mcs_sum += mcs
        rank_sum += rank
        if success:
            bits_ok += tb_bits
        else:
            metrics.tb_error_count += 1
        state.tb_trace.append((now, 1, rank, mcs, tb_bits, int(success), eff_db))

    if metrics.tb_count:
        metrics.avg_mcs = mcs_sum / metrics.tb_count
        metrics.avg_rank = rank_sum / metrics.tb_count
    metrics.throughput_bps = (
        bits_ok / (n_slots * SLOT_MS / 1000.0) if n_slots else 0.0
    )
    metrics.wall_clock_seconds = time.perf_counter() - t_start
    return metrics


def run_scenario(cfg: ScenarioConfig) -> tuple[Metrics, SimState]:
    state = build_scenario(cfg)
    metrics = run_slots(state)
    return metrics, state


# ----------------------------------------------------------------------
# Aggregation and traces
# ----------------------------------------------------------------------


@dataclass
class AggregateStats:
    mean_throughput_bps: float
    ci95_throughput_bps: float
    mean_mcs: float
    mean_rank: float
    mean_exec_seconds: float
    mean_csi_search_seconds: float
    csi_search_count: int
    n_runs: int


def aggregate_runs(runs: list[Metrics]) -> AggregateStats:
    """Mean and normal-approximation 95% CI across independent runs."""
    if not runs:
        raise ValueError("no runs to aggregate")
    tput = np.array([m.throughput_bps for m in runs])
    ci = 1.96 * tput.std(ddof=1) / math.sqrt(len(runs)) if len(runs) > 1 else 0.0
    return AggregateStats(
        mean_throughput_bps=float(tput.mean()),
        ci95_throughput_bps=float(ci),
        mean_mcs=float(np.mean([m.avg_mcs for m in runs])),
        mean_rank=float(np.mean([m.avg_rank for m in runs])),
        mean_exec_seconds=float(np.mean([m.wall_clock_seconds for m in runs])),
        mean_csi_search_seconds=float(np.mean([m.csi_search_seconds for m in runs])),
        csi_search_count=int(runs[0].csi_search_count),
        n_runs=len(runs),
    )


TB_TRACE_HEADER = "timeMs,pairId,rank,mcs,tbBits,success,effSinrDb"
FB_TRACE_HEADER = "timeMs,rnti,ri,i1,i2List,mcs,tbSizeBits"


def tb_trace_csv(rows) -> str:
    lines = [TB_TRACE_HEADER]
    for t, pair, rank, mcs, bits, ok, eff_db in rows:
        lines.append(f"{t:.1f},{pair},{rank},{mcs},{bits},{ok},{eff_db:.4f}")
    return "\n".join(lines) + "\n"


def fb_trace_csv(rows) -> str:
    lines = [FB_TRACE_HEADER]
    for t, rnti, ri, i1, i2s, mcs, bits in rows:
        lines.append(f"{t:.1f},{rnti},{ri},{i1},{i2s},{mcs},{bits}")
    return "\n".join(lines) + "\n"
