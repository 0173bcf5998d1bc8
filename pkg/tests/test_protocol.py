import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from falconpack.exceptions import NoiseBudgetError, PartyMismatchError
from falconpack.packing import make_plan
from falconpack.protocol import rlwe
from falconpack.protocol.secure_conv import secure_dwconv
from falconpack.protocol.sharing import Share, reconstruct, share
from falconpack.protocol.wire import (MsgType, decode_output, encode_output, frame, pack_bits,
                                      unframe, unpack_bits)
from falconpack.ring import RingPoly, poly_mul_negacyclic
from falconpack.tensor import ConvDims, HeParams, Tensor, conv2d_reference
from falconpack.tiling import comm_cost

P = HeParams(n=2048)
CHI2_15_999 = 37.70  # chi-square critical value, 15 dof, p = 0.001


def chi2_top_nibble(values, bits=32):
    counts = np.bincount((np.asarray(values, dtype=np.uint64) >> np.uint64(bits - 4)).astype(int),
                         minlength=16)
    expect = counts.sum() / 16
    return float(((counts - expect) ** 2 / expect).sum())


def msg(rng, params=P):
    return RingPoly(rng.integers(0, params.p, size=params.n, dtype=np.uint64), params.q_bits)


def small_poly(rng, bound, params=P, density=1.0):
    v = rng.integers(-bound, bound, size=params.n, endpoint=True)
    v[rng.random(params.n) > density] = 0
    return RingPoly(v, params.q_bits)


def plain_product(m, w, params=P):
    return RingPoly(poly_mul_negacyclic(m, w).coeffs & np.uint64(params.p - 1), params.q_bits)


# sharing --------------------------------------------------------------------

def test_share_round_trip(rng):
    x = Tensor.random((3, 4, 5), rng)
    a, b = share(x, rng)
    assert reconstruct(a, b) == x and reconstruct(b, a) == x


def test_client_share_is_uniform(rng):
    x = Tensor(np.full((64, 64), 7, dtype=np.uint64))
    a, _ = share(x, rng)
    assert chi2_top_nibble(a.tensor.data.ravel()) < CHI2_15_999


def test_party_mismatch(rng):
    a, _ = share(Tensor.random((2, 2), rng), rng)
    with pytest.raises(PartyMismatchError):
        reconstruct(a, a)
    with pytest.raises(PartyMismatchError):
        Share("eve", a.tensor)


# rlwe primitives --------------------------------------------------------------

def test_encrypt_decrypt(rng):
    sk, _ = rlwe.keygen(P, rng)
    m = msg(rng)
    ct = rlwe.encrypt(m, sk, rng)
    assert rlwe.decrypt(ct, sk) == m
    assert rlwe.measured_noise(ct, sk, m) <= ct.noise


def test_add_plain_and_add(rng):
    sk, _ = rlwe.keygen(P, rng)
    m1, m2 = msg(rng), msg(rng)
    ct = rlwe.encrypt(m1, sk, rng)
    total = RingPoly((m1.coeffs + m2.coeffs) & np.uint64(P.p - 1), P.q_bits)
    assert rlwe.decrypt(rlwe.hom_add_plain(ct, m2), sk) == total
    assert rlwe.decrypt(rlwe.hom_add(ct, rlwe.encrypt(m2, sk, rng)), sk) == total


def test_mul_plain_tracks_noise(rng):
    sk, pk = rlwe.keygen(P, rng)
    m, w = msg(rng), small_poly(rng, 255, density=0.01)
    ct = rlwe.rerandomize(rlwe.hom_mul_plain(rlwe.encrypt(m, sk, rng), w), pk, rng)
    want = plain_product(m, w)
    assert rlwe.decrypt(ct, sk) == want
    assert rlwe.measured_noise(ct, sk, want) <= ct.noise < rlwe.noise_limit(P)


def test_noise_budget_error(rng):
    sk, _ = rlwe.keygen(P, rng)
    w = RingPoly(rng.integers(0, P.p, size=P.n, dtype=np.uint64), P.q_bits)
    ct = rlwe.hom_mul_plain(rlwe.encrypt(msg(rng), sk, rng), w)
    with pytest.raises(NoiseBudgetError):
        rlwe.decrypt(ct, sk)


def test_extract_every_index(rng):
    sk, _ = rlwe.keygen(P, rng)
    m = msg(rng)
    ct = rlwe.encrypt(m, sk, rng)
    for idx in range(P.n):
        assert rlwe.lwe_decrypt(rlwe.extract_lwe(ct, idx), sk) == int(m.coeffs[idx])


def test_lwe_sub_scalar_and_batch_decrypt(rng):
    sk, _ = rlwe.keygen(P, rng)
    m = msg(rng)
    ct = rlwe.encrypt(m, sk, rng)
    read = rng.choice(P.n, size=40, replace=False)
    r = rng.integers(0, P.p, size=40, dtype=np.uint64)
    single = [rlwe.lwe_decrypt(rlwe.lwe_sub_scalar(rlwe.extract_lwe(ct, int(i)), int(v)), sk)
              for i, v in zip(read, r)]
    b_vals = (ct.b.coeffs[read] - r * np.uint64(rlwe.delta(P))) & np.uint64(P.q - 1)
    batch = rlwe.decrypt_at(ct.a, b_vals, read, sk)
    want = (m.coeffs[read] - r) & np.uint64(P.p - 1)
    assert batch.tolist() == single == want.tolist()


# wire -------------------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(bits=st.integers(1, 64), count=st.integers(0, 50), seed=st.integers(0, 2**31))
def test_pack_bits_round_trip(bits, count, seed):
    rng = np.random.default_rng(seed)
    hi = np.iinfo(np.uint64).max if bits == 64 else (1 << bits) - 1
    v = rng.integers(0, hi, size=count, dtype=np.uint64, endpoint=True)
    blob = pack_bits(v, bits)
    assert len(blob) == (count * bits + 7) // 8
    assert np.array_equal(unpack_bits(blob, count, bits), v)


def test_frames_and_output_payload(rng):
    a = rng.integers(0, P.q, size=P.n, dtype=np.uint64)
    b = rng.integers(0, P.q, size=17, dtype=np.uint64)
    kind, payload = unframe(frame(MsgType.OUTPUT_CT, encode_output(a, b, P.q_bits)))
    assert kind == MsgType.OUTPUT_CT
    a2, b2 = decode_output(payload, P.n, P.q_bits)
    assert np.array_equal(a, a2) and np.array_equal(b, b2)


# secure convolution -----------------------------------------------------------

def run(dims, backend, seed=0, scheme="falcon_tiled", bound=255, params=P):
    rng = np.random.default_rng(seed)
    x = Tensor.random((dims.C, dims.H, dims.W), rng)
    w = Tensor.small((dims.K, dims.G, dims.R, dims.R), rng, bound)
    xc, xs = share(x, rng)
    yc, ys, t = secure_dwconv(xc, xs, w, dims, params, backend=backend, seed=seed, scheme=scheme)
    return yc, ys, t, conv2d_reference(x, w, dims)


@pytest.mark.parametrize("backend", ["ideal", "rlwe"])
@pytest.mark.parametrize("scheme", ["falcon_tiled", "falcon", "cheetah", "iron"])
def test_secure_conv_is_exact(backend, scheme):
    yc, ys, t, want = run(ConvDims(6, 6, 8, 3), backend, seed=3, scheme=scheme)
    assert reconstruct(yc, ys) == want
    plan = make_plan(scheme, ConvDims(6, 6, 8, 3), P)
    assert t.poly_mults == plan.poly_mult_count


def test_backends_share_the_same_outputs():
    d = ConvDims(5, 5, 6, 3, stride=2)
    ideal, rl = run(d, "ideal", seed=11), run(d, "rlwe", seed=11)
    assert ideal[0] == rl[0] and ideal[1] == rl[1]


def test_server_output_blinding_is_uniform():
    d = ConvDims(8, 8, 16, 3)
    rng = np.random.default_rng(5)
    x = Tensor(np.zeros((16, 8, 8), dtype=np.uint64))
    w = Tensor.small((16, 1, 3, 3), rng, 3)
    xc, xs = share(x, rng)
    yc, _, _ = secure_dwconv(xc, xs, w, d, P, backend="ideal", seed=9)
    assert chi2_top_nibble(yc.tensor.data.ravel()) < CHI2_15_999


def test_large_weights_exhaust_noise_budget():
    with pytest.raises(NoiseBudgetError):
        run(ConvDims(5, 5, 4, 3), "rlwe", bound=1 << 30)


@pytest.mark.parametrize("scheme", ["falcon_tiled", "falcon"])
def test_transcript_matches_model(scheme):
    d = ConvDims(7, 7, 64, 3)
    _, _, t, _ = run(d, "ideal", scheme=scheme)
    model = comm_cost(scheme, d, P)
    assert t.input_payload_bits == model.input_bits
    assert t.output_payload_bits == model.output_bits
    assert t.input_ciphertexts == model.input_poly_count
    assert t.output_ciphertexts == model.output_poly_count
    assert t.max_overhead_bytes() <= 64


def test_transcript_is_deterministic():
    d = ConvDims(5, 5, 4, 3)
    a, b = run(d, "rlwe", seed=2)[2], run(d, "rlwe", seed=2)[2]
    assert a.to_json() == b.to_json()


def test_weight_bound_covers_default_weights():
    from falconpack.cli import RLWE_WEIGHT_BOUND
    # every feasible tile has C_w R^2 <= C_w HW <= C_x HW <= N taps per weight polynomial
    for n in (2048, 4096, 8192, 16384, 32768):
        params = HeParams(n=n)
        assert rlwe.weight_bound(params, n) >= RLWE_WEIGHT_BOUND
        worst = rlwe.ETA * n * RLWE_WEIGHT_BOUND + rlwe.rerandomize_noise(params)
        assert worst < rlwe.noise_limit(params)
