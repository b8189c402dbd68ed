"""Pure-Python kernels, the fallback when the compiled extension is absent.

Each function mirrors its Cython twin in hecg._kernels exactly: same
signature, same return convention, bit-identical floating point. The
logistic loop runs on Python floats (IEEE-754 binary64 with correctly
rounded * and -, like the C doubles in the extension), so both backends
produce byte-identical keystreams.
"""

import numpy as np

COMPILED = False


def logistic_fill(r: float, x0: float, burn_in: int, out: np.ndarray) -> int:
    """Iterate x <- r*x*(1-x) from x0, discard burn_in values, fill out.

    Returns len(out) on success. On a degenerate iterate (exactly 0.0 or
    1.0) returns its position: negative positions are burn-in iterates
    (position - burn_in), 0..n-1 are emission slots.
    """
    n = out.shape[0]
    x = x0
    for i in range(burn_in):
        x = r * x * (1.0 - x)
        if x <= 0.0 or x >= 1.0:
            return i - burn_in
    for i in range(n):
        x = r * x * (1.0 - x)
        if x <= 0.0 or x >= 1.0:
            return i
        out[i] = x
    return n


def keystream_apply(quantized: np.ndarray, perm: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Permute then XOR: out[i] = quantized[perm[i]] ^ mask[i]."""
    return np.bitwise_xor(quantized[perm], mask)


def keystream_invert(ciphertext: np.ndarray, perm: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Exact inverse of keystream_apply: out[perm[i]] = ciphertext[i] ^ mask[i]."""
    out = np.empty_like(ciphertext)
    out[perm] = np.bitwise_xor(ciphertext, mask)
    return out
