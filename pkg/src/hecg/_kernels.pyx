# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled inner loops for keystream generation and application.

The logistic iteration is inherently sequential (each iterate feeds the
next), so it cannot be vectorised; this loop dominates encrypt/decrypt
time in the pure-Python build. Arithmetic is two rounded multiplies and
a subtract per step, matching the fallback in hecg._kernels_py bit for
bit (the build disables FP contraction).
"""

import numpy as np

COMPILED = True


def logistic_fill(double r, double x0, Py_ssize_t burn_in, double[::1] out):
    """Iterate x <- r*x*(1-x) from x0, discard burn_in values, fill out.

    Returns len(out) on success, else the position of the first
    degenerate iterate (negative during burn-in).
    """
    cdef Py_ssize_t n = out.shape[0]
    cdef Py_ssize_t i
    cdef double x = x0
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


def keystream_apply(const unsigned char[::1] quantized,
                    const Py_ssize_t[::1] perm,
                    const unsigned char[::1] mask):
    """Permute then XOR: out[i] = quantized[perm[i]] ^ mask[i]."""
    cdef Py_ssize_t n = quantized.shape[0]
    cdef Py_ssize_t i
    out_arr = np.empty(n, dtype=np.uint8)
    cdef unsigned char[::1] out = out_arr
    for i in range(n):
        out[i] = quantized[perm[i]] ^ mask[i]
    return out_arr


def keystream_invert(const unsigned char[::1] ciphertext,
                     const Py_ssize_t[::1] perm,
                     const unsigned char[::1] mask):
    """Exact inverse of keystream_apply: out[perm[i]] = ciphertext[i] ^ mask[i]."""
    cdef Py_ssize_t n = ciphertext.shape[0]
    cdef Py_ssize_t i
    out_arr = np.empty(n, dtype=np.uint8)
    cdef unsigned char[::1] out = out_arr
    for i in range(n):
        out[perm[i]] = ciphertext[i] ^ mask[i]
    return out_arr
