import dataclasses
import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from falconpack.exceptions import CapacityError, GeometryError, InfeasibleError
from falconpack.packing import (CheetahPlan, FalconPlan, IronPlan, PackingLayout, depthwise_patterns,
                                extract_output_dw, extract_output_group, greedy_scs_arrange, offset,
                                pack_input_dw, pack_input_group, pack_weight_dw, pack_weight_group,
                                plan_layout, split_weight_poly, superstring_length, unpack_input_dw)
from falconpack.packing.depthwise import kernel_span, output_indices_dw
from falconpack.packing.layout import FilterSlot, check_layout, tile_is_feasible
from falconpack.packing.scs import embeds, overlap
from falconpack.ring import poly_mul_negacyclic
from falconpack.tensor import ConvDims, HeParams, Tensor, conv2d_reference
from oracles import scs_optimum


def rand(shape, rng):
    return Tensor.random(shape, rng)


def dw_product(x, w, layout, params, piece=0):
    y = poly_mul_negacyclic(pack_input_dw(x, params), pack_weight_dw(w, layout, params, piece))
    return extract_output_dw(y, layout, layout.dims, piece)


# offset --------------------------------------------------------------------

def test_offset_closed_form_values():
    assert [offset(c, 4, 4) for c in range(4)] == [4, 9, 6, 0]
    assert [offset(c, 8, 4) for c in range(4)] == [8, 17, 10, 0]


@pytest.mark.parametrize("args", [(0, 3, 3), (4, 4, 4), (-1, 4, 4), (0, 6, 4)])
def test_offset_errors(args):
    with pytest.raises(GeometryError):
        offset(*args)


def _contributions(layout, piece=0):
    """Map every product coefficient to the (filter, channel, tap, pixel) terms landing there.

    Enumerates all input x weight coefficient pairs with the negacyclic wrap,
    independent of the read formula.
    """
    d, n = layout.dims, layout.n
    hits = {}
    o = d.W * (d.R - 1) + d.R - 1
    for f in layout.pieces[piece]:
        for l, lp in itertools.product(range(d.R), repeat=2):
            wi = f.slot * d.hw + o - l * d.W - lp
            for c in range(layout.c_x):
                for i, j in itertools.product(range(d.H), range(d.W)):
                    k = (c * d.hw + i * d.W + j + wi) % n
                    hits.setdefault(k, []).append((f.filter, c, l, lp, i, j))
    return hits


@pytest.mark.parametrize("c_x,c_w,n", [(8, 4, 2048), (4, 4, 1024 * 2), (6, 2, 2048)])
def test_read_indices_see_only_their_own_terms(c_x, c_w, n):
    d = ConvDims(5, 5, c_x, 3)
    if not tile_is_feasible(d.hw, n, c_x, c_w):
        pytest.skip("tile not feasible")
    layout = plan_layout(d, n, c_x, c_w)
    for p in range(layout.k):
        hits = _contributions(layout, p)
        idx = output_indices_dw(layout, p)
        for f in layout.pieces[p]:
            for i2, j2 in itertools.product(range(d.out_h), range(d.out_w)):
                terms = hits.get(int(idx[f.filter, i2, j2]), [])
                want = {(f.filter, f.channel, l, lp, i2 + l, j2 + lp)
                        for l in range(3) for lp in range(3)}
                assert set(terms) == want and len(terms) == 9


def test_weight_index_sets_are_disjoint_and_reads_in_range():
    for c_x, c_w in [(4, 4), (8, 4), (12, 2), (6, 6)]:
        d = ConvDims(4, 4, c_x, 3)
        n = 2048
        if not tile_is_feasible(d.hw, n, c_x, c_w):
            continue
        layout = plan_layout(d, n, c_x, c_w)
        base = kernel_span(d) - (np.arange(3)[:, None] * d.W + np.arange(3))
        for p in range(layout.k):
            sets = [set((f.slot * d.hw + base).ravel().tolist()) for f in layout.pieces[p]]
            assert sum(map(len, sets)) == len(set().union(*sets))
            assert output_indices_dw(layout, p).max() < n


# input / weight packing ---------------------------------------------------

def test_pack_input_examples(rng):
    p = HeParams(n=2048)
    assert pack_input_dw(Tensor.zeros((2, 3, 3)), p).nonzero() == 0
    x = Tensor(np.array([[[1, 2], [3, 4]]]))
    assert pack_input_dw(x, p).coeffs[:5].tolist() == [1, 2, 3, 4, 0]
    blk = rand((5, 6, 7), rng)
    assert unpack_input_dw(pack_input_dw(blk, p), (5, 6, 7)) == blk
    with pytest.raises(CapacityError):
        pack_input_dw(rand((50, 7, 7), rng), p)


def test_pack_weight_zero_and_padding(rng):
    p = HeParams(n=2048)
    d = ConvDims(5, 5, 4, 3)
    layout = plan_layout(d, 2048, 4, 4)
    assert pack_weight_dw(Tensor.zeros((4, 3, 3)), layout, p).nonzero() == 0
    # one real channel, padded to C_w = 2 with a zero filter
    d1 = ConvDims(5, 5, 1, 3)
    lay1 = plan_layout(d1, 2048, 2, 2)
    w = rand((1, 1, 3, 3), rng)
    poly = pack_weight_dw(w, lay1, p)
    assert poly.nonzero() == np.count_nonzero(w.data)
    x = rand((1, 5, 5), rng)
    assert np.array_equal(dw_product(x, w, lay1, p).data[:1], conv2d_reference(x, w, d1).data)


def test_central_depthwise_case(rng):
    p = HeParams(n=2048)
    d = ConvDims(5, 5, 4, 3)
    layout = plan_layout(d, 2048, 4, 4)
    x, w = rand((4, 5, 5), rng), rand((4, 1, 3, 3), rng)
    assert dw_product(x, w, layout, p) == conv2d_reference(x, w, d)


def test_identity_kernel_recovers_input(rng):
    p = HeParams(n=2048)
    d = ConvDims(6, 6, 4, 1)
    layout = plan_layout(d, 2048, 4, 4)
    x = rand((4, 6, 6), rng)
    assert dw_product(x, Tensor(np.ones((4, 1, 1), dtype=np.uint64)), layout, p) == x


def test_stride_two_read_indices():
    d = ConvDims(5, 5, 2, 3, stride=2)
    layout = plan_layout(d, 2048, 2, 2)
    idx = output_indices_dw(layout, 0)
    assert idx.shape == (2, 2, 2)
    o = d.W * 2 + 2
    for f in layout.pieces[0]:
        s = f.slot + f.channel
        want = [[s * 25 + o + i * 2 * 5 + j * 2 for j in range(2)] for i in range(2)]
        assert idx[f.filter].tolist() == want


# split for k > 1 -------------------------------------------------------------

def test_split_k2_covers_all_channels(rng):
    p = HeParams(n=2048)
    d = ConvDims(5, 5, 8, 3)
    layout = plan_layout(d, 2048, 8, 4)
    assert layout.k == 2
    x, w = rand((8, 5, 5), rng), rand((8, 1, 3, 3), rng)
    xp = pack_input_dw(x, p)
    polys = split_weight_poly(w, layout, p)
    seen = []
    ref = conv2d_reference(x, w, d).data
    for piece, wp in enumerate(polys):
        out = extract_output_dw(poly_mul_negacyclic(xp, wp), layout, d, piece)
        for f in layout.pieces[piece]:
            assert np.array_equal(out.data[f.filter], ref[f.channel])
            seen.append(f.channel)
    assert sorted(seen) == list(range(8))


def test_split_k1_equals_single_weight_poly(rng):
    p = HeParams(n=2048)
    layout = plan_layout(ConvDims(5, 5, 4, 3), 2048, 4, 4)
    w = rand((4, 1, 3, 3), rng)
    assert split_weight_poly(w, layout, p) == [pack_weight_dw(w, layout, p)]


def test_leading_zero_removal_keeps_outputs(rng):
    n = 4096
    p = HeParams(n=n)
    d = ConvDims(4, 4, 8, 3)
    trimmed = plan_layout(d, n, 8, 4)
    shift = (8 + 2) * 2  # pairs before piece 1 in the concatenated arrangement
    untrimmed = dataclasses.replace(trimmed, pieces=(
        trimmed.pieces[0],
        tuple(dataclasses.replace(f, slot=f.slot + shift) for f in trimmed.pieces[1])))
    check_layout(untrimmed)
    x, w = rand((8, 4, 4), rng), rand((8, 1, 3, 3), rng)
    a = FalconPlan(d, p, 8, 4, layout=trimmed).evaluate(x, w)
    b = FalconPlan(d, p, 8, 4, layout=untrimmed).evaluate(x, w)
    assert a == b == conv2d_reference(x, w, d)


# layout bookkeeping ------------------------------------------------------------

def test_layout_counts_and_json():
    layout = plan_layout(ConvDims.square(14, 576, 3), 4096, 8, 4) if tile_is_feasible(256, 4096, 8, 4) \
        else plan_layout(ConvDims.square(14, 576, 3), 4096, 4, 4)
    assert layout.n_x == -(-576 // layout.c_x) and layout.n_w == -(-576 // layout.c_w)
    back = PackingLayout.from_dict(layout.to_dict())
    assert back == layout
    assert '"slots"' in layout.to_json()


def test_layout_rejects_capacity_and_collisions():
    with pytest.raises(InfeasibleError):
        plan_layout(ConvDims.square(14, 576, 3), 4096, 8, 4)
    with pytest.raises(CapacityError):
        plan_layout(ConvDims(50, 50, 2, 3), 2048, 2, 2)
    d = ConvDims(4, 4, 4, 3)
    good = plan_layout(d, 2048, 4, 4)
    bad = dataclasses.replace(good, pieces=((FilterSlot(0, 0, 0), FilterSlot(1, 1, 1),
                                             FilterSlot(2, 2, 9), FilterSlot(3, 3, 20)),))
    with pytest.raises(GeometryError):
        check_layout(bad)


def test_superstring_length_and_feasibility_agree():
    for hw in (16, 49, 196):
        for n in (2048, 4096):
            for c_w in range(2, 20, 2):
                for c_x in range(c_w, 60, c_w):
                    fits = superstring_length(c_x, c_w) * hw <= n and c_x * hw <= n
                    assert fits == tile_is_feasible(hw, n, c_x, c_w)


def test_utilization_beats_standard_padding():
    for c_w in range(2, 64, 2):
        for c_x in range(c_w, 130, c_w):
            assert Fraction(c_w, superstring_length(c_x, c_w)) > Fraction(2, c_x + 2)
    assert Fraction(4, superstring_length(4, 4)) == Fraction(4, 11)
    assert Fraction(4, 11) > Fraction(1, 4)


# greedy superstring -------------------------------------------------------------

def test_scs_small_cases():
    assert greedy_scs_arrange(depthwise_patterns(1)).total_slots == 1
    arr = greedy_scs_arrange(depthwise_patterns(4))
    assert arr.total_slots == 11
    assert arr.superstring == (4, 0, 0, 0, 1, 0, 3, 0, 0, 2, 0)  # W3 000 W0 0 W2 00 W1 0
    with pytest.raises(ValueError):
        greedy_scs_arrange([])


@pytest.mark.parametrize("c", range(1, 8))
def test_scs_matches_exhaustive_optimum(c):
    pats = depthwise_patterns(c)
    arr = greedy_scs_arrange(pats)
    assert embeds(arr, pats)
    assert arr.total_slots == scs_optimum(c) <= c * c
    assert greedy_scs_arrange(pats) == arr


def test_scs_not_longer_than_closed_form():
    for c in range(2, 13, 2):
        assert greedy_scs_arrange(depthwise_patterns(c)).total_slots <= superstring_length(c, c)
        assert greedy_scs_arrange(depthwise_patterns(c)).total_slots == superstring_length(c, c)


def test_overlap_definition():
    assert overlap((0, 0, 1), (0, 1, 0)) == 2
    assert overlap((1, 2), (3, 4)) == 0
    assert overlap((1, 0, 0), (0, 0, 2)) == 2


@pytest.mark.parametrize("c", [2, 4, 6])
def test_greedy_arrangement_is_a_valid_layout(rng, c):
    arr = greedy_scs_arrange(depthwise_patterns(c))
    lead = arr.leading_zeros
    piece = tuple(FilterSlot(i, i, arr.weight_slot(i) - lead) for i in range(c))
    d = ConvDims(4, 4, c, 3)
    p = HeParams(n=2048)
    layout = PackingLayout("falcon_dw", d, 2048, c, c, (piece,))
    check_layout(layout)
    x, w = rand((c, 4, 4), rng), rand((c, 1, 3, 3), rng)
    assert FalconPlan(d, p, c, c, layout=layout).evaluate(x, w) == conv2d_reference(x, w, d)


# group packing ---------------------------------------------------------------

def test_group_g1_is_bit_identical_to_depthwise(rng):
    p = HeParams(n=2048)
    d = ConvDims(5, 5, 8, 3)
    layout = plan_layout(d, 2048, 8, 4)
    w = rand((4, 1, 3, 3), rng)
    assert pack_weight_group(w, layout, p) == pack_weight_dw(w, layout, p)
    x = rand((8, 5, 5), rng)
    assert pack_input_group(x, d, p) == pack_input_dw(x, p)
    y = poly_mul_negacyclic(pack_input_dw(x, p), pack_weight_dw(w, layout, p))
    g = extract_output_group(y, layout, d)
    assert np.array_equal(g.data[:, 0], extract_output_dw(y, layout, d).data)


@pytest.mark.parametrize("g,c,n", [(2, 8, 2048), (4, 8, 4096), (3, 6, 2048), (2, 12, 8192)])
def test_group_packing_matches_reference(rng, g, c, n):
    d = ConvDims(4, 4, c, 3, K=c, G=g)
    p = HeParams(n=n)
    plan = FalconPlan(d, p, 1, 1) if not tile_is_feasible(16 * g * g, n, 2, 2) else FalconPlan(d, p, 2, 2)
    x, w = rand((c, 4, 4), rng), rand((c, g, 3, 3), rng)
    assert plan.evaluate(x, w) == conv2d_reference(x, w, d)


def test_single_group_equals_cheetah(rng):
    d = ConvDims(4, 4, 4, 3, K=4, G=4)
    p = HeParams(n=2048)
    x, w = rand((4, 4, 4), rng), rand((4, 4, 3, 3), rng)
    ref = conv2d_reference(x, w, d)
    assert FalconPlan(d, p, 1, 1).evaluate(x, w) == ref == CheetahPlan(d, p).evaluate(x, w)


# baselines -------------------------------------------------------------------

def test_cheetah_depthwise_counts(rng):
    d = ConvDims(5, 5, 4, 3)
    p = HeParams(n=2048)
    plan = CheetahPlan(d, p)
    assert plan.n_inputs == 1
    assert plan.zero_slot_fraction == Fraction(3, 4)
    x, w = rand((4, 5, 5), rng), rand((4, 1, 3, 3), rng)
    ws = [v for v in plan.pack_weights(w) if v is not None]
    assert len(ws) == 1  # all four filters, each spanning C_n * HW coefficients
    span = plan.c_n * 25
    assert all(ws[0].coeffs[f * span:(f + 1) * span].any() for f in range(4))
    assert plan.evaluate(x, w) == conv2d_reference(x, w, d)


def test_iron_counts(rng):
    d = ConvDims(5, 5, 6, 3)
    plan = IronPlan(d, HeParams(n=2048))
    assert plan.n_inputs == 6 and len(plan.products) == 6
    x, w = rand((6, 5, 5), rng), rand((6, 1, 3, 3), rng)
    assert plan.evaluate(x, w) == conv2d_reference(x, w, d)


@pytest.mark.parametrize("dims", [ConvDims(6, 6, 6, 3, K=4, G=6), ConvDims(7, 5, 8, 3, K=8, G=2, stride=2),
                                  ConvDims(12, 12, 40, 3)])
def test_baselines_match_reference(rng, dims):
    p = HeParams(n=2048)
    x, w = rand((dims.C, dims.H, dims.W), rng), rand((dims.K, dims.G, dims.R, dims.R), rng)
    ref = conv2d_reference(x, w, dims)
    assert CheetahPlan(dims, p).evaluate(x, w) == ref
    assert IronPlan(dims, p).evaluate(x, w) == ref


def test_spatial_overflow_rejected():
    with pytest.raises(CapacityError):
        CheetahPlan(ConvDims(50, 50, 1, 3), HeParams(n=2048))


# master property ---------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(h=st.integers(1, 16), w=st.integers(1, 16), c=st.integers(1, 64),
       r=st.sampled_from([1, 3, 5]), s=st.sampled_from([1, 2]), seed=st.integers(0, 2**32 - 1))
def test_packing_matches_reference_fuzz(h, w, c, r, s, seed):
    h, w = max(h, r), max(w, r)
    d = ConvDims(h, w, c, r, stride=s)
    p = HeParams(n=2048)
    rng = np.random.default_rng(seed)
    x, k = rand((c, h, w), rng), rand((c, 1, r, r), rng)
    from falconpack.tiling import solve_tiling
    t = solve_tiling(d, p)
    assert FalconPlan(d, p, t.c_x, t.c_w).evaluate(x, k) == conv2d_reference(x, k, d)
