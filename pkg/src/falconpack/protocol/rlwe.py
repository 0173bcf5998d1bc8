"""Toy RLWE over Z_q[X]/(X^N+1) with a power-of-two q.

Simulation grade only: parameters and samplers are chosen for exactness at
desk scale, not for any security level.  Messages are scaled by
``delta = q / p`` so they occupy the top ``l`` bits and noise the rest;
every ciphertext carries a worst-case bound on its noise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import CapacityError, NoiseBudgetError, ParameterMismatchError
from ..ring import RingPoly, poly_add, poly_mul_negacyclic, poly_scale, poly_sub
from ..tensor import HeParams

ETA = 2  # centered binomial parameter; fresh noise lies in [-ETA, ETA]


def delta(params: HeParams) -> int:
    return 1 << (params.q_bits - params.bits)


def noise_limit(params: HeParams) -> int:
    """Decryption rounds correctly while |noise| < delta / 2."""
    return delta(params) // 2


def rerandomize_noise(params: HeParams) -> int:
    return 2 * ETA * params.n + ETA


def weight_bound(params: HeParams, taps: int) -> int:
    """Largest weight magnitude B with ETA * taps * B + re-randomization < delta / 2.

    ``taps`` is the number of nonzero weight coefficients one output ciphertext
    accumulates (C_w R^2 for a depthwise weight polynomial).
    """
    room = noise_limit(params) - 1 - rerandomize_noise(params)
    return max(0, room // (ETA * taps))


def expand_seed(seed: bytes, params: HeParams) -> RingPoly:
    """Uniform polynomial derived from a 16-byte seed (PCG64, not a XOF)."""
    gen = np.random.Generator(np.random.PCG64(int.from_bytes(seed, "little")))
    coeffs = gen.integers(0, 1 << params.q_bits, size=params.n, dtype=np.uint64)
    return RingPoly(coeffs, params.q_bits)


def sample_ternary(params: HeParams, rng: np.random.Generator) -> RingPoly:
    return RingPoly(rng.integers(-1, 1, size=params.n, endpoint=True), params.q_bits)


def sample_cbd(params: HeParams, rng: np.random.Generator, eta: int = ETA) -> RingPoly:
    bits = rng.integers(0, 2, size=(2, params.n, eta))
    return RingPoly(bits[0].sum(axis=1) - bits[1].sum(axis=1), params.q_bits)


def centered_l1(poly: RingPoly, bits: int) -> int:
    """L1 norm of the centered lift of ``poly mod 2**bits``."""
    v = (poly.coeffs & np.uint64((1 << bits) - 1)).astype(np.int64)
    half = 1 << (bits - 1)
    v = np.where(v >= half, v - (1 << bits), v)
    return int(np.abs(v).sum())


def lift_plain(w: RingPoly, params: HeParams) -> RingPoly:
    """Centered lift of a plaintext polynomial mod p into Z_q."""
    v = (w.coeffs & np.uint64(params.p - 1)).astype(np.int64)
    v = np.where(v >= params.p // 2, v - params.p, v)
    return RingPoly(v, params.q_bits)


@dataclass(frozen=True)
class SecretKey:
    s: RingPoly
    params: HeParams


@dataclass(frozen=True)
class PublicKey:
    b: RingPoly
    a_seed: bytes
    params: HeParams

    @property
    def a(self) -> RingPoly:
        return expand_seed(self.a_seed, self.params)


@dataclass(frozen=True)
class RlweCiphertext:
    """Decrypts as ``b + a s = delta m + e`` with ``|e| <= noise``."""

    b: RingPoly
    a: RingPoly
    params: HeParams
    noise: int = 0
    a_seed: bytes | None = None  # set while ``a`` is still the seed expansion


@dataclass(frozen=True)
class LweCiphertext:
    a: np.ndarray  # N residues mod q
    b: int
    params: HeParams
    noise: int = 0


def _check(ct_params: HeParams, other: HeParams) -> None:
    if ct_params != other:
        raise ParameterMismatchError(f"parameters differ: {ct_params} vs {other}")


def keygen(params: HeParams, rng: np.random.Generator) -> tuple[SecretKey, PublicKey]:
    s = sample_ternary(params, rng)
    seed = rng.bytes(16)
    a = expand_seed(seed, params)
    b = poly_sub(sample_cbd(params, rng), poly_mul_negacyclic(a, s))
    return SecretKey(s, params), PublicKey(b, seed, params)


def encode(m: RingPoly, params: HeParams) -> RingPoly:
    if m.n != params.n or m.modulus_bits != params.q_bits:
        raise ParameterMismatchError("plaintext ring differs from the parameters")
    return poly_scale(RingPoly(m.coeffs & np.uint64(params.p - 1), params.q_bits), delta(params))


def encrypt(m: RingPoly, sk: SecretKey, rng: np.random.Generator,
            seed: bytes | None = None) -> RlweCiphertext:
    """Symmetric encryption; ``a`` comes from a fresh seed so only ``b`` travels."""
    params = sk.params
    seed = rng.bytes(16) if seed is None else seed
    a = expand_seed(seed, params)
    e = sample_cbd(params, rng)
    b = poly_add(poly_sub(e, poly_mul_negacyclic(a, sk.s)), encode(m, params))
    return RlweCiphertext(b, a, params, noise=ETA, a_seed=seed)


def encrypt_zero_pk(pk: PublicKey, rng: np.random.Generator) -> RlweCiphertext:
    """Public-key encryption of zero, used to re-randomize results."""
    params = pk.params
    u = sample_ternary(params, rng)
    b = poly_add(poly_mul_negacyclic(pk.b, u), sample_cbd(params, rng))
    a = poly_add(poly_mul_negacyclic(pk.a, u), sample_cbd(params, rng))
    return RlweCiphertext(b, a, params, noise=rerandomize_noise(params))


def phase(ct: RlweCiphertext, sk: SecretKey) -> RingPoly:
    return poly_add(ct.b, poly_mul_negacyclic(ct.a, sk.s))


def _round(values: np.ndarray, params: HeParams) -> np.ndarray:
    shift = params.q_bits - params.bits
    half = np.uint64(1 << (shift - 1))
    return ((values + half) >> np.uint64(shift)) & np.uint64(params.p - 1)


def decrypt(ct: RlweCiphertext, sk: SecretKey, debug: bool = True) -> RingPoly:
    """Message mod p; with ``debug`` an over-budget noise bound is a hard error."""
    _check(ct.params, sk.params)
    if debug and ct.noise >= noise_limit(ct.params):
        raise NoiseBudgetError(f"noise bound {ct.noise} reaches delta/2 = {noise_limit(ct.params)}")
    v = phase(ct, sk).coeffs & np.uint64((1 << ct.params.q_bits) - 1)
    return RingPoly(_round(v, ct.params), ct.params.q_bits)


def measured_noise(ct: RlweCiphertext, sk: SecretKey, m: RingPoly) -> int:
    """Largest |e| in ``phase - delta m`` (test helper)."""
    diff = poly_sub(phase(ct, sk), encode(m, ct.params))
    return max(abs(v) for v in diff.centered())


def hom_add_plain(ct: RlweCiphertext, m: RingPoly) -> RlweCiphertext:
    return RlweCiphertext(poly_add(ct.b, encode(m, ct.params)), ct.a, ct.params, ct.noise,
                          ct.a_seed)


def hom_add(x: RlweCiphertext, y: RlweCiphertext) -> RlweCiphertext:
    _check(x.params, y.params)
    return RlweCiphertext(poly_add(x.b, y.b), poly_add(x.a, y.a), x.params, x.noise + y.noise)


def hom_mul_plain(ct: RlweCiphertext, w: RingPoly) -> RlweCiphertext:
    """Multiply by a plaintext polynomial (centered lift mod p)."""
    params = ct.params
    lifted = lift_plain(w, params)
    norm = centered_l1(w, params.bits)
    return RlweCiphertext(poly_mul_negacyclic(ct.b, lifted), poly_mul_negacyclic(ct.a, lifted),
                          params, ct.noise * norm)


def rerandomize(ct: RlweCiphertext, pk: PublicKey, rng: np.random.Generator) -> RlweCiphertext:
    return hom_add(ct, encrypt_zero_pk(pk, rng))


def extract_lwe(ct: RlweCiphertext, idx: int) -> LweCiphertext:
    """LWE ciphertext of coefficient ``idx``: ``<a', s>`` equals ``(a s)[idx]``."""
    n = ct.params.n
    if not 0 <= idx < n:
        raise CapacityError(f"extraction index {idx} outside [0, {n})")
    a = ct.a.coeffs
    j = np.arange(n)
    vec = np.where(j <= idx, a[(idx - j) % n], np.uint64(0) - a[(idx - j) % n])
    vec &= np.uint64((1 << ct.params.q_bits) - 1)
    return LweCiphertext(vec, int(ct.b.coeffs[idx]), ct.params, ct.noise)


def lwe_sub_scalar(ct: LweCiphertext, r: int) -> LweCiphertext:
    """Shift the plaintext by ``-r mod p``."""
    q = 1 << ct.params.q_bits
    b = (ct.b - (r % ct.params.p) * delta(ct.params)) % q
    return LweCiphertext(ct.a, b, ct.params, ct.noise)


def lwe_decrypt(ct: LweCiphertext, sk: SecretKey) -> int:
    _check(ct.params, sk.params)
    q = 1 << ct.params.q_bits
    s = np.array(sk.s.centered(), dtype=object)
    value = (ct.b + int(np.dot(ct.a.astype(object), s))) % q
    return int(_round(np.array([value], dtype=np.uint64), ct.params)[0])


def decrypt_at(a: RingPoly, b_values: np.ndarray, read: np.ndarray, sk: SecretKey) -> np.ndarray:
    """Batch form of extract + lwe_decrypt for many indices of one ciphertext."""
    params = sk.params
    as_ = poly_mul_negacyclic(a, sk.s).coeffs[read]
    v = (b_values + as_) & np.uint64((1 << params.q_bits) - 1)
    return _round(v, params)
