"""Two-party secure convolution over packed ciphertexts.

The client encrypts its packed input share, the server adds its own share,
multiplies by the packed weights, re-randomizes, subtracts a fresh mask
from every output coefficient and returns only those coefficients plus the
shared ``a`` polynomial.  The client's decryption and the server's mask are
additive shares of the convolution output.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import FalconPackError, NoiseBudgetError
from ..packing.plan import ConvPlan, make_plan
from ..ring import RingPoly
from ..tensor import ConvDims, HeParams, Tensor
from . import rlwe
from .channel import MemoryChannel, MessageRecord
from .sharing import Share
from .wire import MsgType, decode_input, decode_output, encode_input, encode_output, pack_bits

BACKENDS = ("ideal", "rlwe")


class RlweBackend:
    name = "rlwe"

    def keygen(self, params: HeParams, rng: np.random.Generator):
        return rlwe.keygen(params, rng)

    def encrypt(self, m: RingPoly, sk: rlwe.SecretKey, rng: np.random.Generator):
        return rlwe.encrypt(m, sk, rng)

    def rerandomize(self, ct: rlwe.RlweCiphertext, pk: rlwe.PublicKey, rng: np.random.Generator):
        return rlwe.rerandomize(ct, pk, rng)


class IdealBackend(RlweBackend):
    """Noise-free stand-in: zero secret, zero ``a``; same messages and sizes."""

    name = "ideal"

    def keygen(self, params: HeParams, rng: np.random.Generator):
        zero = RingPoly.zero(params.n, params.q_bits)
        return rlwe.SecretKey(zero, params), rlwe.PublicKey(zero, bytes(16), params)

    def encrypt(self, m: RingPoly, sk: rlwe.SecretKey, rng: np.random.Generator):
        params = sk.params
        return rlwe.RlweCiphertext(rlwe.encode(m, params), RingPoly.zero(params.n, params.q_bits),
                                   params, noise=0, a_seed=bytes(16))

    def rerandomize(self, ct, pk, rng):
        return ct


def get_backend(name: str) -> RlweBackend:
    if name == "rlwe":
        return RlweBackend()
    if name == "ideal":
        return IdealBackend()
    raise FalconPackError(f"unknown backend {name!r}; expected one of {BACKENDS}")


@dataclass
class ProtocolTranscript:
    seed: int
    backend: str
    scheme: str
    n: int
    q_bits: int
    messages: list[MessageRecord] = field(default_factory=list)
    poly_mults: int = 0
    hom_adds: int = 0
    extractions: int = 0
    max_noise_bound: int = 0

    def _sum(self, attr: str, kind: str | None = None, direction: str | None = None) -> int:
        return sum(getattr(m, attr) for m in self.messages
                   if (kind is None or m.kind == kind)
                   and (direction is None or m.direction == direction))

    @property
    def client_to_server_bytes(self) -> int:
        return self._sum("frame_bytes", direction="c2s")

    @property
    def server_to_client_bytes(self) -> int:
        return self._sum("frame_bytes", direction="s2c")

    @property
    def setup_bytes(self) -> int:
        return self._sum("frame_bytes", kind=MsgType.PUBLIC_KEY.name)

    @property
    def input_payload_bits(self) -> int:
        return self._sum("payload_bits", kind=MsgType.INPUT_CT.name)

    @property
    def output_payload_bits(self) -> int:
        return self._sum("payload_bits", kind=MsgType.OUTPUT_CT.name)

    @property
    def input_ciphertexts(self) -> int:
        return sum(m.kind == MsgType.INPUT_CT.name for m in self.messages)

    @property
    def output_ciphertexts(self) -> int:
        return sum(m.kind == MsgType.OUTPUT_CT.name for m in self.messages)

    def max_overhead_bytes(self) -> float:
        """Largest per-message framing cost beyond the counted ciphertext bits."""
        cts = [m for m in self.messages if m.kind != MsgType.PUBLIC_KEY.name]
        return max((m.frame_bytes - m.payload_bits / 8 for m in cts), default=0.0)

    def summary(self) -> dict:
        return {
            "seed": self.seed, "backend": self.backend, "scheme": self.scheme, "N": self.n,
            "q_bits": self.q_bits, "client_to_server_bytes": self.client_to_server_bytes,
            "server_to_client_bytes": self.server_to_client_bytes,
            "setup_bytes": self.setup_bytes,
            "input_ciphertexts": self.input_ciphertexts,
            "output_ciphertexts": self.output_ciphertexts,
            "input_payload_bits": self.input_payload_bits,
            "output_payload_bits": self.output_payload_bits,
            "poly_mults": self.poly_mults, "hom_adds": self.hom_adds,
            "extractions": self.extractions, "max_noise_bound": self.max_noise_bound,
        }

    def to_json(self) -> str:
        body = self.summary()
        body["messages"] = [m.__dict__ for m in self.messages]
        return json.dumps(body, sort_keys=True)


class ClientParty:
    def __init__(self, plan: ConvPlan, x_share: Share, backend: RlweBackend,
                 rng: np.random.Generator):
        if x_share.party != "client":
            raise FalconPackError("client needs the client share")
        self.plan, self.x, self.backend, self.rng = plan, x_share.tensor, backend, rng
        self.state = "init"

    def send_key(self, ch: MemoryChannel) -> None:
        params = self.plan.params
        self.sk, pk = self.backend.keygen(params, self.rng)
        ch.send("c2s", MsgType.PUBLIC_KEY, pk.a_seed + pack_bits(pk.b.coeffs, params.q_bits))
        self.state = "keyed"

    def send_inputs(self, ch: MemoryChannel) -> None:
        params = self.plan.params
        for poly in self.plan.pack_inputs(self.x):
            ct = self.backend.encrypt(poly, self.sk, self.rng)
            ch.send("c2s", MsgType.INPUT_CT, encode_input(ct.a_seed, ct.b.coeffs, params.q_bits),
                    payload_bits=params.n * params.q_bits)
        self.state = "waiting"

    def receive_outputs(self, ch: MemoryChannel) -> Share:
        params, plan = self.plan.params, self.plan
        out = np.zeros(plan.out_size, dtype=np.uint64)
        for prod in plan.products:
            a, b = decode_output(ch.recv("s2c", MsgType.OUTPUT_CT), params.n, params.q_bits)
            if b.size != prod.read.size:
                raise FalconPackError(f"expected {prod.read.size} outputs, got {b.size}")
            out[prod.dest] = rlwe.decrypt_at(RingPoly(a, params.q_bits), b, prod.read, self.sk)
        self.state = "done"
        dims = plan.dims
        return Share("client", Tensor(out.reshape(dims.K, dims.out_h, dims.out_w), params.bits))


class ServerParty:
    def __init__(self, plan: ConvPlan, x_share: Share, weights: Tensor, backend: RlweBackend,
                 mask_rng: np.random.Generator, noise_rng: np.random.Generator,
                 transcript: ProtocolTranscript):
        if x_share.party != "server":
            raise FalconPackError("server needs the server share")
        self.plan, self.x, self.w = plan, x_share.tensor, weights
        self.backend, self.mask_rng, self.noise_rng = backend, mask_rng, noise_rng
        self.t = transcript
        self.state = "init"

    def receive_key(self, ch: MemoryChannel) -> None:
        params = self.plan.params
        payload = ch.recv("c2s", MsgType.PUBLIC_KEY)
        seed, b = decode_input(payload, params.n, params.q_bits)
        self.pk = rlwe.PublicKey(RingPoly(b, params.q_bits), seed, params)
        self.state = "keyed"

    def evaluate(self, ch: MemoryChannel) -> Share:
        plan, params = self.plan, self.plan.params
        limit = rlwe.noise_limit(params)
        cts = []
        for x_poly in plan.pack_inputs(self.x):
            seed, b = decode_input(ch.recv("c2s", MsgType.INPUT_CT), params.n, params.q_bits)
            a = (RingPoly.zero(params.n, params.q_bits) if self.backend.name == "ideal"
                 else rlwe.expand_seed(seed, params))
            ct = rlwe.RlweCiphertext(RingPoly(b, params.q_bits), a, params, noise=rlwe.ETA
                                     if self.backend.name == "rlwe" else 0)
            cts.append(rlwe.hom_add_plain(ct, x_poly))
            self.t.hom_adds += 1
        ws = plan.pack_weights(self.w)
        out = np.zeros(plan.out_size, dtype=np.uint64)
        q_mask = np.uint64((1 << params.q_bits) - 1)
        for prod in plan.products:
            acc = None
            for i, j in prod.terms:
                term = rlwe.hom_mul_plain(cts[i], ws[j])
                self.t.poly_mults += 1
                acc = term if acc is None else rlwe.hom_add(acc, term)
            acc = self.backend.rerandomize(acc, self.pk, self.noise_rng)
            self.t.max_noise_bound = max(self.t.max_noise_bound, acc.noise)
            if acc.noise >= limit:
                raise NoiseBudgetError(
                    f"noise bound {acc.noise} reaches delta/2 = {limit}; weights too large "
                    f"for the rlwe backend")
            r = self.mask_rng.integers(0, params.p, size=prod.read.size, dtype=np.uint64)
            b_vals = (acc.b.coeffs[prod.read] - r * np.uint64(rlwe.delta(params))) & q_mask
            self.t.extractions += prod.read.size
            ch.send("s2c", MsgType.OUTPUT_CT, encode_output(acc.a.coeffs, b_vals, params.q_bits),
                    payload_bits=(params.n + prod.read.size) * params.q_bits)
            out[prod.dest] = r
        self.state = "done"
        dims = plan.dims
        return Share("server", Tensor(out.reshape(dims.K, dims.out_h, dims.out_w), params.bits))


def secure_dwconv(client_share: Share, server_share: Share, W: Tensor, dims: ConvDims,
                  params: HeParams, backend: str = "ideal", seed: int = 0,
                  scheme: str = "falcon_tiled", tile: tuple[int, int] | None = None,
                  ) -> tuple[Share, Share, ProtocolTranscript]:
    """Run one secure convolution; returns (client Y share, server Y share, transcript)."""
    if client_share.tensor.bits != params.bits or W.bits != params.bits:
        raise FalconPackError(f"tensors must be {params.bits}-bit to match the parameters")
    plan = make_plan(scheme, dims, params, tile)
    be = get_backend(backend)
    client_rng, mask_rng, noise_rng = (np.random.default_rng(s)
                                       for s in np.random.SeedSequence(seed).spawn(3))
    transcript = ProtocolTranscript(seed, be.name, plan.scheme, params.n, params.q_bits)
    ch = MemoryChannel(log=transcript.messages)
    client = ClientParty(plan, client_share, be, client_rng)
    server = ServerParty(plan, server_share, W, be, mask_rng, noise_rng, transcript)
    client.send_key(ch)
    server.receive_key(ch)
    client.send_inputs(ch)
    y_server = server.evaluate(ch)
    y_client = client.receive_outputs(ch)
    return y_client, y_server, transcript
