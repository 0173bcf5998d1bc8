"""Two-party secure convolution: secret sharing, toy RLWE and the packed protocol."""

from .rlwe import (LweCiphertext, RlweCiphertext, decrypt, encrypt, extract_lwe, hom_add_plain,
                   hom_mul_plain, keygen, lwe_decrypt, lwe_sub_scalar)
from .secure_conv import ProtocolTranscript, secure_dwconv
from .sharing import Share, reconstruct, share

__all__ = [
    "LweCiphertext", "ProtocolTranscript", "RlweCiphertext", "Share", "decrypt", "encrypt",
    "extract_lwe", "hom_add_plain", "hom_mul_plain", "keygen", "lwe_decrypt", "lwe_sub_scalar",
    "reconstruct", "secure_dwconv", "share",
]
