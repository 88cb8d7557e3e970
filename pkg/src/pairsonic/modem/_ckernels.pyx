# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: GF(2^8) Reed-Solomon and multi-tone Goertzel energies.

Mirrors ``_pykernels`` exactly; see there for the algorithm notes.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, M_PI
from libc.string cimport memset

from pairsonic.modem.errors import UncorrectableError

cnp.import_array()

cdef int PRIM_POLY = 0x11D

cdef enum:
    MAX_TONES = 64
cdef unsigned char GF_EXP[512]
cdef int GF_LOG[256]


cdef void _init_tables() noexcept:
    cdef int x = 1, i
    for i in range(255):
        GF_EXP[i] = x
        GF_LOG[x] = i
        x <<= 1
        if x & 0x100:
            x ^= PRIM_POLY
    for i in range(255, 512):
        GF_EXP[i] = GF_EXP[i - 255]
    GF_LOG[0] = 0

_init_tables()


cdef inline int gmul(int a, int b) noexcept nogil:
    if a == 0 or b == 0:
        return 0
    return GF_EXP[GF_LOG[a] + GF_LOG[b]]


cdef inline int gdiv(int a, int b) noexcept nogil:
    if a == 0:
        return 0
    return GF_EXP[(GF_LOG[a] + 255 - GF_LOG[b]) % 255]


cdef int _generator(int nsym, int* gen) noexcept nogil:
    # highest degree first, gen has nsym + 1 slots
    cdef int i, j, root
    memset(gen, 0, (nsym + 1) * sizeof(int))
    gen[0] = 1
    for i in range(nsym):
        root = GF_EXP[i]
        for j in range(i + 1, 0, -1):
            gen[j] ^= gmul(gen[j - 1], root)
    return 0


def _check_lengths(int n, int nsym):
    if nsym < 1 or nsym >= 255:
        raise ValueError("parity count must be in [1, 254]")
    if n > 255:
        raise ValueError("data + parity must not exceed 255 bytes")


def rs_encode(const unsigned char[:] data, int nsym):
    """Systematic parity bytes for ``data``."""
    cdef int n = data.shape[0]
    _check_lengths(n + nsym, nsym)
    cdef int gen[256]
    cdef int rem[256]
    cdef int i, j, coef, lc
    _generator(nsym, gen)
    memset(rem, 0, sizeof(rem))
    for i in range(n):
        coef = data[i] ^ rem[0]
        for j in range(nsym - 1):
            rem[j] = rem[j + 1]
        rem[nsym - 1] = 0
        if coef:
            lc = GF_LOG[coef]
            for j in range(nsym):
                if gen[j + 1]:
                    rem[j] ^= GF_EXP[lc + GF_LOG[gen[j + 1]]]
    return bytes([rem[j] for j in range(nsym)])


cdef void _syndromes(const unsigned char* cw, int n, int nsym, int* synd) noexcept nogil:
    cdef int i, k, acc, la
    for i in range(nsym):
        la = i  # log of a^i
        acc = 0
        for k in range(n):
            if acc:
                acc = GF_EXP[GF_LOG[acc] + la]
            acc ^= cw[k]
        synd[i] = acc


def rs_syndromes(const unsigned char[:] codeword, int nsym):
    cdef int synd[256]
    if nsym < 1 or nsym >= 255:
        raise ValueError("parity count must be in [1, 254]")
    if codeword.shape[0] == 0:
        return [0] * nsym
    _syndromes(&codeword[0], codeword.shape[0], nsym, synd)
    return [synd[i] for i in range(nsym)]


def rs_decode(const unsigned char[:] codeword, int nsym):
    """Correct at most nsym // 2 byte errors; returns ``(data, n_corrected)``."""
    cdef int n = codeword.shape[0]
    _check_lengths(n, nsym)
    if n <= nsym:
        raise ValueError("codeword shorter than its parity")
    cdef int synd[256]
    cdef int lam[257]
    cdef int prev[257]
    cdef int tmp[257]
    cdef int omega[256]
    cdef int positions[256]
    cdef unsigned char fixed[256]
    cdef int i, j, k, d, L = 0, m = 1, b = 1, coef, deg, npos = 0
    cdef int e, acc, x, x_inv, x_inv2, num, den, xp, any_nz = 0

    _syndromes(&codeword[0], n, nsym, synd)
    for i in range(nsym):
        if synd[i]:
            any_nz = 1
    if not any_nz:
        return bytes(codeword[: n - nsym]), 0

    memset(lam, 0, sizeof(lam))
    memset(prev, 0, sizeof(prev))
    lam[0] = 1
    prev[0] = 1
    for k in range(nsym):
        d = synd[k]
        for i in range(1, L + 1):
            d ^= gmul(lam[i], synd[k - i])
        if d == 0:
            m += 1
            continue
        coef = gdiv(d, b)
        for i in range(nsym + 1):
            tmp[i] = lam[i]
        for i in range(nsym + 1 - m):
            lam[i + m] ^= gmul(coef, prev[i])
        if 2 * L <= k:
            for i in range(nsym + 1):
                prev[i] = tmp[i]
            L = k + 1 - L
            b = d
            m = 1
        else:
            m += 1
    deg = nsym
    while deg > 0 and lam[deg] == 0:
        deg -= 1
    if L * 2 > nsym or deg != L:
        raise UncorrectableError("too many errors")

    for k in range(n):
        e = n - 1 - k
        acc = 0
        for i in range(deg + 1):
            if lam[i]:
                acc ^= GF_EXP[(GF_LOG[lam[i]] + (255 - e) * i) % 255]
        if acc == 0:
            positions[npos] = k
            npos += 1
    if npos != L:
        raise UncorrectableError("error locator roots not found")

    memset(omega, 0, sizeof(omega))
    for i in range(nsym):
        if synd[i]:
            for j in range(deg + 1):
                if i + j < nsym:
                    omega[i + j] ^= gmul(synd[i], lam[j])

    for i in range(n):
        fixed[i] = codeword[i]
    for j in range(npos):
        k = positions[j]
        e = n - 1 - k
        x = GF_EXP[e]
        x_inv = GF_EXP[(255 - e) % 255]
        x_inv2 = gmul(x_inv, x_inv)
        num = 0
        xp = 1
        for i in range(nsym):
            num ^= gmul(omega[i], xp)
            xp = gmul(xp, x_inv)
        den = 0
        xp = 1
        for i in range(1, deg + 1, 2):
            den ^= gmul(lam[i], xp)
            xp = gmul(xp, x_inv2)
        if den == 0:
            raise UncorrectableError("zero derivative in Forney step")
        fixed[k] ^= gmul(x, gdiv(num, den))

    _syndromes(fixed, n, nsym, synd)
    for i in range(nsym):
        if synd[i]:
            raise UncorrectableError("correction did not yield a codeword")
    return bytes(fixed[: n - nsym]), L


def tone_energies(samples, starts, int length, freqs, double sample_rate):
    """|DFT|^2 of each window at each frequency, by Goertzel recurrence."""
    cdef const double[::1] x = np.ascontiguousarray(samples, dtype=np.float64)
    cdef const long long[::1] st = np.ascontiguousarray(starts, dtype=np.int64)
    cdef const double[::1] fr = np.ascontiguousarray(freqs, dtype=np.float64)
    cdef Py_ssize_t nw = st.shape[0], nf = fr.shape[0], w, f, i, s0
    out_arr = np.zeros((nw, nf), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    if nw == 0:
        return out_arr
    if nf > MAX_TONES:
        raise ValueError(f"at most {MAX_TONES} tones per call")
    if np.min(st) < 0 or np.max(st) + length > x.shape[0]:
        raise IndexError("window exceeds sample buffer")
    cdef double coeff[MAX_TONES]
    cdef double s1[MAX_TONES]
    cdef double s2[MAX_TONES]
    cdef double v, s
    for f in range(nf):
        coeff[f] = 2.0 * cos(2.0 * M_PI * fr[f] / sample_rate)
    with nogil:
        for w in range(nw):
            s0 = st[w]
            for f in range(nf):
                s1[f] = 0.0
                s2[f] = 0.0
            for i in range(length):
                v = x[s0 + i]
                for f in range(nf):
                    s = v + coeff[f] * s1[f] - s2[f]
                    s2[f] = s1[f]
                    s1[f] = s
            for f in range(nf):
                out[w, f] = s1[f] * s1[f] + s2[f] * s2[f] - coeff[f] * s1[f] * s2[f]
    return out_arr
