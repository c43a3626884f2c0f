import math

import numpy as np
import pytest

from mimosim.codebook import (
    CodebookError,
    dft_beam,
    dump_codebook,
    make_codebook,
    make_two_port,
    make_type_one_sp,
    pack_i1,
    unpack_i1,
)
from mimosim.codebook_tables import (
    PORT_LAYOUTS,
    SUPPORTED_N1_N2,
    default_oversampling,
    rank2_i13_offsets,
    rank34_i13_offsets,
)

ALL_LAYOUTS = [layout for layouts in PORT_LAYOUTS.values() for layout in layouts]


def check_power_constraint(w, rank):
    gram = w.conj().T @ w
    assert np.max(np.abs(gram - np.eye(rank) / rank)) < 1e-12
    assert abs(np.linalg.norm(w) ** 2 - 1.0) < 1e-12


class TestTables:
    # One test per transcribed table row.
    def test_port_layout_rows(self):
        assert PORT_LAYOUTS[2] == ((1, 1),)
        assert PORT_LAYOUTS[4] == ((2, 1),)
        assert PORT_LAYOUTS[8] == ((2, 2), (4, 1))
        assert PORT_LAYOUTS[12] == ((3, 2), (6, 1))
        assert PORT_LAYOUTS[16] == ((4, 2), (8, 1))
        assert PORT_LAYOUTS[24] == ((4, 3), (6, 2), (12, 1))
        assert PORT_LAYOUTS[32] == ((4, 4), (8, 2), (16, 1))
        for ports, layouts in PORT_LAYOUTS.items():
            for n1, n2 in layouts:
                assert 2 * n1 * n2 == ports

    def test_oversampling_defaults(self):
        assert default_oversampling(2, 1) == (4, 1)
        assert default_oversampling(4, 2) == (4, 4)
        assert default_oversampling(16, 1) == (4, 1)

    def test_rank2_offsets_n1_2_n2_1(self):
        assert rank2_i13_offsets(2, 1) == ((0, 0), (1, 0))

    def test_rank2_offsets_n1_gt2_n2_1(self):
        for n1 in (4, 6, 8, 12, 16):
            assert rank2_i13_offsets(n1, 1) == ((0, 0), (1, 0), (2, 0), (3, 0))

    def test_rank2_offsets_equal(self):
        for n in (2, 4):
            assert rank2_i13_offsets(n, n) == ((0, 0), (1, 0), (0, 1), (1, 1))

    def test_rank2_offsets_n1_gt_n2_gt1(self):
        for n1, n2 in ((3, 2), (4, 2), (4, 3), (6, 2), (8, 2)):
            assert rank2_i13_offsets(n1, n2) == ((0, 0), (1, 0), (0, 1), (2, 0))

    def test_rank34_offsets_rows(self):
        assert rank34_i13_offsets(2, 1) == ((1, 0),)
        assert rank34_i13_offsets(4, 1) == ((1, 0), (2, 0), (3, 0))
        assert rank34_i13_offsets(6, 1) == ((1, 0), (2, 0), (3, 0), (4, 0))
        assert rank34_i13_offsets(2, 2) == ((1, 0), (0, 1), (1, 1))
        assert rank34_i13_offsets(3, 2) == ((1, 0), (0, 1), (1, 1), (2, 0))


class TestTwoPort:
    def test_single_port(self):
        cb = make_two_port(1, 1)
        assert np.array_equal(cb.precoder_at(0, 0), [[1.0]])
        assert cb.num_i1 == 1 and cb.num_i2 == 1

    def test_rank1_table_entries(self):
        cb = make_two_port(2, 1)
        assert cb.num_i1 == 1 and cb.num_i2 == 4
        s = 1 / math.sqrt(2)
        assert np.allclose(cb.precoder_at(0, 0), [[s], [s]])
        assert np.allclose(cb.precoder_at(0, 1), [[s], [1j * s]])
        assert np.allclose(cb.precoder_at(0, 2), [[s], [-s]])
        assert np.allclose(cb.precoder_at(0, 3), [[s], [-1j * s]])

    def test_rank2_table_entries(self):
        cb = make_two_port(2, 2)
        assert cb.num_i2 == 2
        assert np.allclose(cb.precoder_at(0, 0), np.array([[1, 1], [1, -1]]) / 2)
        assert np.allclose(cb.precoder_at(0, 1), np.array([[1, 1], [1j, -1j]]) / 2)
        check_power_constraint(cb.precoder_at(0, 0), 2)

    def test_rank1_distinct(self):
        cb = make_two_port(2, 1)
        mats = [cb.precoder_at(0, i2) for i2 in range(4)]
        for a in range(4):
            for b in range(a + 1, 4):
                assert np.max(np.abs(mats[a] - mats[b])) > 1e-12

    def test_rank_over_ports(self):
        with pytest.raises(CodebookError):
            make_two_port(1, 2)


class TestDftBeam:
    def params(self, n1=2, n2=1):
        return make_type_one_sp(n1, n2, 1).params

    def test_dc_beam_all_ones(self):
        assert np.allclose(dft_beam(self.params(4, 2), 0, 0), np.ones(8))

    def test_quarter_turn(self):
        assert np.allclose(dft_beam(self.params(2, 1), 2, 0), [1, 1j])

    def test_kron_layout(self):
        # kron([1, a], [1, b]) == [1, b, a, ab]
        p = make_type_one_sp(2, 2, 1).params
        b = dft_beam(p, 1, 1)
        a_h = np.exp(2j * math.pi * 1 / (p.n1 * p.o1))
        a_v = np.exp(2j * math.pi * 1 / (p.n2 * p.o2))
        assert np.allclose(b, [1, a_v, a_h, a_h * a_v])

    def test_out_of_range(self):
        with pytest.raises(CodebookError):
            dft_beam(self.params(2, 1), 8, 0)

    def test_unit_magnitudes(self):
        p = make_type_one_sp(4, 2, 1).params
        assert np.allclose(np.abs(dft_beam(p, 7, 3)), 1.0)

    def test_tilde_halved(self):
        p = make_type_one_sp(4, 2, 3).params
        vt = dft_beam(p, 3, 1, tilde=True)
        assert vt.shape == (4,)  # (n1/2) * n2
        full = np.exp(4j * math.pi * 3 * np.arange(2) / 16)
        assert np.allclose(vt[::2] / vt[0], full / full[0])


class TestPacking:
    def test_paper_example(self):
        assert pack_i1(3, 0, 0, 8, 1) == 3

    def test_formula_example(self):
        assert pack_i1(1, 2, 1, 4, 3) == 1 + 4 * (2 + 3 * 1) == 21

    def test_round_trip_full_cube(self):
        for n11, n12, n13 in ((4, 3, 2), (8, 1, 4)):
            for i13 in range(n13):
                for i12 in range(n12):
                    for i11 in range(n11):
                        i1 = pack_i1(i11, i12, i13, n11, n12)
                        assert unpack_i1(i1, n11, n12) == (i11, i12, i13)

    def test_out_of_range_component(self):
        with pytest.raises(CodebookError):
            pack_i1(4, 0, 0, 4, 3)


class TestSinglePanel:
    def test_four_port_rank1_index_counts(self):
        cb = make_type_one_sp(2, 1, 1)
        assert cb.num_i1 == 8
        assert cb.num_i2 == 4

    def test_four_port_rank1_beam_formula(self):
        cb = make_type_one_sp(2, 1, 1)
        for l in range(8):
            for n in range(4):
                w = cb.precoder_at(pack_i1(l, 0, 0, 8, 1), n)
                v = np.array([1, np.exp(2j * math.pi * l / 8)])
                phi = np.exp(1j * math.pi * n / 2)
                expect = np.concatenate([v, phi * v])[:, None] / 2
                assert np.allclose(w, expect, atol=1e-15)

    def test_mode1_second_polarization_cophasing_only(self):
        # For fixed i1 the first-polarization block must not depend on i2.
        for n1, n2, rank in ((2, 1, 1), (2, 2, 2), (4, 2, 1), (4, 2, 2)):
            cb = make_type_one_sp(n1, n2, rank)
            half = cb.params.num_ports // 2
            for i1 in (0, cb.num_i1 - 1):
                blocks = [cb.precoder_at(i1, i2)[:half] for i2 in range(cb.num_i2)]
                for b in blocks[1:]:
                    assert np.allclose(b, blocks[0], atol=1e-15)

    @pytest.mark.parametrize("layout", ALL_LAYOUTS)
    @pytest.mark.parametrize("rank", [1, 2, 3, 4])
    def test_power_constraint_sampled(self, layout, rank):
        n1, n2 = layout
        if (n1, n2) == (1, 1):
            cb = make_two_port(2, min(rank, 2))
        else:
            cb = make_type_one_sp(n1, n2, rank)
        rng = np.random.default_rng(rank * 100 + n1 * 10 + n2)
        for _ in range(10):
            i1 = int(rng.integers(cb.num_i1))
            i2 = int(rng.integers(cb.num_i2))
            check_power_constraint(cb.precoder_at(i1, i2), cb.params.rank)

    @pytest.mark.parametrize("layout", ALL_LAYOUTS)
    def test_distinctness_exhaustive(self, layout):
        n1, n2 = layout
        for rank in range(1, 5):
            if (n1, n2) == (1, 1):
                if rank > 2:
                    continue
                cb = make_two_port(2, rank)
            else:
                cb = make_type_one_sp(n1, n2, rank)
            stack = cb.stacked().reshape(cb.num_i1 * cb.num_i2, -1)
            quantized = np.round(stack, 12)
            seen = {q.tobytes() for q in quantized}
            assert len(seen) == cb.num_i1 * cb.num_i2, f"duplicates at {layout} rank {rank}"

    def test_concatenated_beam_structure_at_16_ports(self):
        cb = make_type_one_sp(4, 2, 3)
        assert cb.num_i11 == 8  # halved horizontal range
        assert cb.num_i13 == 4
        w = cb.precoder_at(pack_i1(2, 1, 1, cb.num_i11, cb.num_i12), 0)
        p = cb.params
        vt = dft_beam(p, 2, 1, tilde=True)
        theta = np.exp(1j * math.pi * 1 / 4)
        b1 = np.concatenate([vt, theta * vt])
        b2 = np.concatenate([vt, -theta * vt])
        scale = math.sqrt(3 * 16)
        assert np.allclose(w[:, 0], np.concatenate([b1, b1]) / scale)
        assert np.allclose(w[:, 1], np.concatenate([b2, b2]) / scale)
        assert np.allclose(w[:, 2], np.concatenate([b1, -b1]) / scale)

    def test_unsupported_configs_rejected(self):
        with pytest.raises(CodebookError):
            make_type_one_sp(5, 1, 1)
        with pytest.raises(CodebookError):
            make_type_one_sp(2, 1, 5)
        with pytest.raises(CodebookError):
            make_type_one_sp(2, 2, 1, codebook_mode=2)

    def test_precoder_index_range_errors(self):
        cb = make_type_one_sp(2, 1, 1)
        with pytest.raises(CodebookError):
            cb.precoder_at(cb.num_i1, 0)
        with pytest.raises(CodebookError):
            cb.precoder_at(0, 4)

    def test_factory_dispatch(self):
        assert make_codebook(2, 1, 1, 1).params.num_ports == 2
        assert make_codebook(8, 2, 2, 2).params.num_ports == 8
        with pytest.raises(CodebookError):
            make_codebook(8, 2, 1, 1)  # inconsistent ports vs layout


def test_dump_codebook_block_count():
    cb = make_two_port(2, 1)
    text = dump_codebook(cb)
    assert len(text.strip().split("\n\n")) == 4
