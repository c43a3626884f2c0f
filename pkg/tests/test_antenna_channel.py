import math

import numpy as np
import pytest

from mimosim.antenna_channel import (
    ArrayGeometry,
    ChannelModelParams,
    LinkChannelState,
    LinkGeometry,
    PortConfig,
    PortConfigError,
    apply_txru,
    element_to_port_map,
    generate_channel,
    los_direction,
    los_probability_uma,
    pathloss_uma_db,
    steering_vector,
    validate_port_config,
)
from mimosim.codebook_tables import PORT_LAYOUTS


def link(d=100.0, n_rb=4, fc=4e9, h_tx=25.0, h_rx=1.5):
    return LinkGeometry(
        tx_position=(0.0, 0.0, h_tx),
        rx_position=(d, 0.0, h_rx),
        carrier_frequency_hz=fc,
        n_rb=n_rb,
        rb_bandwidth_hz=180e3,
    )


class TestPortConfig:
    def test_32_port_table1_config(self):
        geom = ArrayGeometry(num_rows=8, num_cols=4, dual_polarized=True)
        cfg = PortConfig(n_h=4, n_v=4, dual_polarized=True)
        assert validate_port_config(cfg, geom) == 32

    def test_two_port_dual(self):
        geom = ArrayGeometry(num_rows=1, num_cols=2, dual_polarized=True)
        cfg = PortConfig(n_h=1, n_v=1, dual_polarized=True)
        assert validate_port_config(cfg, geom) == 2

    def test_unsupported_layout(self):
        geom = ArrayGeometry(num_rows=1, num_cols=5, dual_polarized=True)
        cfg = PortConfig(n_h=5, n_v=1, dual_polarized=True)
        with pytest.raises(PortConfigError):
            validate_port_config(cfg, geom)

    def test_divisibility(self):
        geom = ArrayGeometry(num_rows=3, num_cols=2, dual_polarized=True)
        cfg = PortConfig(n_h=2, n_v=2, dual_polarized=True)
        with pytest.raises(PortConfigError):
            validate_port_config(cfg, geom)

    def test_polarization_mismatch(self):
        geom = ArrayGeometry(num_rows=2, num_cols=2, dual_polarized=False)
        cfg = PortConfig(n_h=2, n_v=1, dual_polarized=True)
        with pytest.raises(PortConfigError):
            validate_port_config(cfg, geom)

    def test_single_pol_skips_table(self):
        # Conf-1-style 2-port single-polarized gNB.
        geom = ArrayGeometry(num_rows=2, num_cols=4, dual_polarized=False)
        cfg = PortConfig(n_h=2, n_v=1, dual_polarized=False)
        assert validate_port_config(cfg, geom) == 2


class TestPortMap:
    def test_conf2a_two_vertical_elements_per_port(self):
        geom = ArrayGeometry(num_rows=4, num_cols=2, dual_polarized=True)
        cfg = PortConfig(n_h=2, n_v=2, dual_polarized=True)
        ports = element_to_port_map(cfg, geom)
        assert len(ports) == 8
        slants = geom.element_slants_deg()
        for idx in ports:
            assert len(idx) == 2
            assert slants[idx[0]] == slants[idx[1]]  # co-polarized
            # vertically adjacent: same column, consecutive rows
            r0, c0 = divmod(idx[0] % 8, geom.num_cols)
            r1, c1 = divmod(idx[1] % 8, geom.num_cols)
            assert c0 == c1 and abs(r0 - r1) == 1

    def test_one_element_one_port(self):
        geom = ArrayGeometry(num_rows=1, num_cols=1, dual_polarized=False)
        cfg = PortConfig(n_h=1, n_v=1, dual_polarized=False)
        ports = element_to_port_map(cfg, geom)
        assert len(ports) == 1 and list(ports[0]) == [0]

    @pytest.mark.parametrize(
        "layout", [layout for layouts in PORT_LAYOUTS.values() for layout in layouts]
    )
    def test_partition_property_all_table1_layouts(self, layout):
        n1, n2 = layout
        geom = ArrayGeometry(num_rows=2 * n2, num_cols=n1, dual_polarized=True)
        cfg = PortConfig(n_h=n1, n_v=n2, dual_polarized=True)
        ports = element_to_port_map(cfg, geom)
        assert len(ports) == cfg.num_ports
        flat = np.concatenate(ports)
        assert len(flat) == geom.total_elements
        assert len(np.unique(flat)) == geom.total_elements


class TestSteering:
    def test_broadside_all_ones(self):
        geom = ArrayGeometry(num_rows=1, num_cols=2, dual_polarized=False)
        sv = steering_vector(geom, azimuth_deg=0.0, zenith_deg=90.0)
        assert np.allclose(sv, [1.0, 1.0])

    def test_endfire_half_wavelength(self):
        geom = ArrayGeometry(num_rows=1, num_cols=2, dual_polarized=False)
        sv = steering_vector(geom, azimuth_deg=90.0, zenith_deg=90.0)
        assert np.allclose(sv, [1.0, -1.0])

    def test_unit_magnitude_random_directions(self):
        rng = np.random.default_rng(2)
        geom = ArrayGeometry(num_rows=3, num_cols=4, dual_polarized=True, bearing_deg=37.0)
        for _ in range(20):
            sv = steering_vector(geom, rng.uniform(-180, 180), rng.uniform(0, 180))
            assert np.allclose(np.abs(sv), 1.0)


class TestPathloss:
    def test_one_meter_anchor(self):
        lk = LinkGeometry((0, 0, 0.0), (1.0, 0, 0.0), 1e9, 1, 180e3)
        assert pathloss_uma_db(lk, los=True) == pytest.approx(28.0)

    def test_los_formula_at_100m(self):
        lk = link(d=100.0)
        d3d = math.hypot(100.0, 23.5)
        expect = 28.0 + 22 * math.log10(d3d) + 20 * math.log10(4.0)
        assert pathloss_uma_db(lk, los=True) == pytest.approx(expect)
        assert expect == pytest.approx(84.3, abs=0.05)

    def test_nlos_not_below_los(self):
        for d in (10.0, 50.0, 300.0, 800.0):
            lk = link(d=d)
            assert pathloss_uma_db(lk, los=False) >= pathloss_uma_db(lk, los=True)

    def test_los_probability(self):
        assert los_probability_uma(10.0) == 1.0
        assert 0.0 < los_probability_uma(500.0) < 0.1


class TestGenerateChannel:
    def test_single_path_unit_modulus(self):
        lk = LinkGeometry((0, 0, 0.0), (1.0, 0, 0.0), 1e9, 3, 180e3)
        geom = ArrayGeometry(num_rows=1, num_cols=1, dual_polarized=False)
        params = ChannelModelParams(cluster_count=1)
        # unity pathloss at 1 m / 1 GHz requires cancelling the 28 dB anchor
        elem = generate_channel(lk, geom, geom, np.random.default_rng(0), los=True, params=params)
        gain = 10 ** (-pathloss_uma_db(lk, True) / 20.0)
        assert np.allclose(np.abs(elem.h_elem.paged), gain)

    def test_determinism(self):
        lk = link()
        geom = ArrayGeometry(num_rows=2, num_cols=2, dual_polarized=True)
        a = generate_channel(lk, geom, geom, np.random.default_rng(42), los=False)
        b = generate_channel(lk, geom, geom, np.random.default_rng(42), los=False)
        assert np.array_equal(a.h_elem.paged, b.h_elem.paged)

    def test_mean_square_matches_pathloss_gain(self):
        # Monte-Carlo over the documented cluster distribution (single-pol).
        lk = link(d=200.0, n_rb=8)
        geom = ArrayGeometry(num_rows=1, num_cols=1, dual_polarized=False)
        g = 10 ** (-pathloss_uma_db(lk, False) / 10.0)
        acc = 0.0
        rng = np.random.default_rng(123)
        n_seeds = 1000
        for _ in range(n_seeds):
            h = generate_channel(lk, geom, geom, rng, los=False).h_elem
            acc += float(np.sum(np.abs(h.paged) ** 2))
        mean_sq = acc / (n_seeds * lk.n_rb)
        assert abs(mean_sq / g - 1.0) < 0.05

    def test_swapped_shapes_transpose(self):
        lk = link()
        g_tx = ArrayGeometry(num_rows=2, num_cols=2, dual_polarized=False)
        g_rx = ArrayGeometry(num_rows=1, num_cols=2, dual_polarized=False)
        fwd = generate_channel(lk, g_tx, g_rx, np.random.default_rng(1), los=True).h_elem
        rlk = LinkGeometry(lk.rx_position, lk.tx_position, lk.carrier_frequency_hz, lk.n_rb, lk.rb_bandwidth_hz)
        rev = generate_channel(rlk, g_rx, g_tx, np.random.default_rng(1), los=True).h_elem
        assert (fwd.rows, fwd.cols) == (rev.cols, rev.rows)

    def test_frequency_selectivity(self):
        lk = link(d=300.0, n_rb=52)
        geom = ArrayGeometry(num_rows=1, num_cols=1, dual_polarized=False)
        h = generate_channel(lk, geom, geom, np.random.default_rng(5), los=False).h_elem
        mags = np.abs(h.paged[:, 0, 0])
        assert mags.std() / mags.mean() > 0.05  # fades across RBs


class TestApplyTxru:
    def test_identity_virtualization(self):
        lk = link()
        geom = ArrayGeometry(num_rows=1, num_cols=2, dual_polarized=False)
        cfg = PortConfig(n_h=2, n_v=1, dual_polarized=False)
        elem = generate_channel(lk, geom, geom, np.random.default_rng(3), los=True)
        m = element_to_port_map(cfg, geom)
        real = apply_txru(elem, m, m, (0.0, 90.0), (180.0, 90.0), geom, geom)
        # one element per port and w = sv/1: port channel = conj-weighted elements
        assert real.port_channel.rows == 2 and real.port_channel.cols == 2
        assert np.allclose(np.abs(real.port_channel.paged), np.abs(elem.h_elem.paged))

    def test_coherent_two_element_gain(self):
        # Beam matched to a single LOS path doubles power (sqrt(2) amplitude).
        lk = LinkGeometry((0, 0, 1.0), (50.0, 0, 1.0), 4e9, 2, 180e3)
        tx = ArrayGeometry(num_rows=1, num_cols=2, dual_polarized=False)
        rx = ArrayGeometry(num_rows=1, num_cols=1, dual_polarized=False, bearing_deg=180.0)
        params = ChannelModelParams(cluster_count=1)
        elem = generate_channel(lk, tx, rx, np.random.default_rng(0), los=True, params=params)
        tx_map = element_to_port_map(PortConfig(1, 1, False), tx)
        rx_map = element_to_port_map(PortConfig(1, 1, False), rx)
        real = apply_txru(
            elem, tx_map, rx_map, los_direction(lk.tx_position, lk.rx_position),
            los_direction(lk.rx_position, lk.tx_position), tx, rx,
        )
        single = np.abs(elem.h_elem.paged[0, 0, 0])
        assert np.abs(real.port_channel.paged[0, 0, 0]) == pytest.approx(
            math.sqrt(2) * single, rel=1e-9
        )

    def test_norm_bound(self):
        lk = link()
        tx = ArrayGeometry(num_rows=4, num_cols=2, dual_polarized=True)
        rx = ArrayGeometry(num_rows=1, num_cols=2, dual_polarized=True, bearing_deg=180.0)
        elem = generate_channel(lk, tx, rx, np.random.default_rng(9), los=False)
        tx_map = element_to_port_map(PortConfig(2, 2, True), tx)
        rx_map = element_to_port_map(PortConfig(2, 1, True), rx)
        real = apply_txru(elem, tx_map, rx_map, (0, 90), (180, 90), tx, rx)
        bound = math.sqrt(1 * 2) * np.linalg.norm(elem.h_elem.paged)
        assert np.linalg.norm(real.port_channel.paged) <= bound + 1e-9


class TestChannelCadence:
    def make_state(self):
        lk = link(d=150.0)
        tx = ArrayGeometry(num_rows=2, num_cols=2, dual_polarized=True, height_m=25.0)
        rx = ArrayGeometry(num_rows=1, num_cols=2, dual_polarized=True, bearing_deg=180.0)
        return LinkChannelState(
            link=lk,
            tx_geom=tx,
            rx_geom=rx,
            tx_port_cfg=PortConfig(2, 1, True),
            rx_port_cfg=PortConfig(2, 1, True),
            rng_channel=np.random.default_rng(10),
            rng_los=np.random.default_rng(11),
            update_period_ms=100.0,
        )

    def test_identical_object_between_updates(self):
        st = self.make_state()
        first = st.at_time(0.0)
        assert st.at_time(50.0) is first
        assert st.at_time(99.9) is first

    def test_regenerated_after_period(self):
        st = self.make_state()
        first = st.at_time(0.0)
        second = st.at_time(100.0)
        assert second is not first
        assert second.generated_at_ms == 100.0

    def test_los_state_redrawn_on_cadence(self):
        # At 500 m the LOS probability is ~4%, so across redraws the state
        # must settle on NLOS (and stay fixed between redraws).
        lk = link(d=500.0)
        tx = ArrayGeometry(num_rows=2, num_cols=2, dual_polarized=True, height_m=25.0)
        rx = ArrayGeometry(num_rows=1, num_cols=2, dual_polarized=True, bearing_deg=180.0)
        st = LinkChannelState(
            link=lk,
            tx_geom=tx,
            rx_geom=rx,
            tx_port_cfg=PortConfig(2, 1, True),
            rx_port_cfg=PortConfig(2, 1, True),
            rng_channel=np.random.default_rng(0),
            rng_los=np.random.default_rng(1),
            update_period_ms=10.0,
            los_update_period_ms=10.0,
        )
        states = []
        for t in range(0, 200, 10):
            st.at_time(float(t))
            states.append(st.los)
        assert sum(states) < len(states) / 2  # mostly NLOS at 500 m


def test_los_direction_angles():
    az, zen = los_direction(np.array([0, 0, 25.0]), np.array([100.0, 0, 1.5]))
    assert az == pytest.approx(0.0)
    assert zen > 90.0  # pointing below horizon
    az2, _ = los_direction(np.array([0, 0, 0.0]), np.array([0.0, 5.0, 0.0]))
    assert az2 == pytest.approx(90.0)
