"""Independent brute-force oracles used by the unit and acceptance tests.

These deliberately avoid the library's batched search path: feedback
selection is re-derived with plain nested loops over every codebook index,
scoring each candidate through the slow per-precoder SINR route.
"""

import numpy as np

from mimosim.csi import PmSearchConfig, argmax_lowest, mcs_for_sinr_matrix, tb_size
from mimosim.matarr import ComplexMatrixArray
from mimosim.mimo_sinr import IntfNormChannel, SinrMatrix, compute_sinr, constant_precoder


def capacity_of(h_norm: IntfNormChannel, w: np.ndarray, start: int, stop: int) -> float:
    p = constant_precoder(w, h_norm.h.pages)
    s = compute_sinr(h_norm, p)
    return float(np.sum(np.log2(1.0 + s.sinr[:, start:stop])))


def sinr_with_subband_precoders(h_norm, cb, i1, i2_list, sb_size) -> SinrMatrix:
    n_rb = h_norm.h.pages
    pages = [cb.precoder_at(i1, i2_list[min(rb // sb_size, len(i2_list) - 1)]) for rb in range(n_rb)]
    return compute_sinr(h_norm, ComplexMatrixArray.from_paged(np.stack(pages)))


def enumerate_best_feedback(h_norm: IntfNormChannel, factory, cfg: PmSearchConfig):
    """(ri, i1, i2 list, tb bits) by literal nested-loop enumeration.

    PMI layer: per rank, per i1, pick each subband's best i2 by subband
    capacity, accumulate wideband capacity, keep the best i1.  Ties use
    the library's documented rule (lowest index within the capacity
    tolerance); the capacity values themselves come from the slow
    per-candidate route, independent of the batched search.
    Rank layer: the rank with the largest achievable TB size wins,
    ties to the lower rank.
    """
    n_rb, rx_ports = h_norm.h.pages, h_norm.h.rows
    sb_starts = list(range(0, n_rb, cfg.subband_size_rb))
    best_rank = None
    for rank in range(1, min(cfg.rank_limit, rx_ports, h_norm.h.cols, 4) + 1):
        cb = factory(rank)
        if cb is None:
            continue
        wb_caps = np.zeros(cb.num_i1)
        i2_lists = []
        for i1 in range(cb.num_i1):
            i2_list = []
            for start in sb_starts:
                stop = min(start + cfg.subband_size_rb, n_rb)
                caps = np.array(
                    [
                        capacity_of(h_norm, cb.precoder_at(i1, i2), start, stop)
                        for i2 in range(cb.num_i2)
                    ]
                )
                pick = int(argmax_lowest(caps))
                wb_caps[i1] += caps[pick]
                i2_list.append(pick)
            i2_lists.append(i2_list)
        i1 = int(argmax_lowest(wb_caps))
        i2_list = i2_lists[i1]
        sinr = sinr_with_subband_precoders(h_norm, cb, i1, i2_list, cfg.subband_size_rb)
        mcs, _, _ = mcs_for_sinr_matrix(sinr)
        tb = tb_size(mcs, rank, n_rb)
        if best_rank is None or tb > best_rank[0]:
            best_rank = (tb, rank, i1, i2_list)
    tb, rank, i1, i2_list = best_rank
    return rank, i1, i2_list, tb


def random_whitened_channel(rng, rx_ports, tx_ports, n_rb, scale=1.0) -> IntfNormChannel:
    h = scale * (
        rng.standard_normal((n_rb, rx_ports, tx_ports))
        + 1j * rng.standard_normal((n_rb, rx_ports, tx_ports))
    ) / np.sqrt(2)
    return IntfNormChannel(ComplexMatrixArray.from_paged(h))
