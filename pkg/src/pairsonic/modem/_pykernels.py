"""Reference kernels: GF(2^8) Reed-Solomon and multi-tone Goertzel energies.

These are the pure-Python (plus numpy) versions of the routines in
``_ckernels.pyx``.  Both must return identical results; the test-suite runs
every kernel test against each available backend.
"""

from __future__ import annotations

import functools

import numpy as np

from .errors import UncorrectableError

PRIM_POLY = 0x11D
GENERATOR = 2

GF_EXP = [0] * 512
GF_LOG = [0] * 256


def _init_tables() -> None:
    x = 1
    for i in range(255):
        GF_EXP[i] = x
        GF_LOG[x] = i
        x <<= 1
        if x & 0x100:
            x ^= PRIM_POLY
    for i in range(255, 512):
        GF_EXP[i] = GF_EXP[i - 255]


_init_tables()


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return GF_EXP[GF_LOG[a] + GF_LOG[b]]


def gf_div(a: int, b: int) -> int:
    if b == 0:
        raise ZeroDivisionError("division by zero in GF(256)")
    if a == 0:
        return 0
    return GF_EXP[(GF_LOG[a] + 255 - GF_LOG[b]) % 255]


def gf_pow(a: int, e: int) -> int:
    if a == 0:
        return 0
    return GF_EXP[(GF_LOG[a] * e) % 255]


_GEN_CACHE: dict[int, list[int]] = {}


def generator_poly(nsym: int) -> list[int]:
    """prod_{i<nsym} (x - a^i), coefficients highest degree first."""
    g = _GEN_CACHE.get(nsym)
    if g is None:
        g = [1]
        for i in range(nsym):
            root = GF_EXP[i]
            nxt = g + [0]
            for j in range(len(g)):
                nxt[j + 1] ^= gf_mul(g[j], root)
            g = nxt
        _GEN_CACHE[nsym] = g
    return g


def _check_lengths(n: int, nsym: int) -> None:
    if nsym < 1 or nsym >= 255:
        raise ValueError("parity count must be in [1, 254]")
    if n > 255:
        raise ValueError("data + parity must not exceed 255 bytes")


def rs_encode(data: bytes, nsym: int) -> bytes:
    """Systematic parity bytes for ``data``."""
    _check_lengths(len(data) + nsym, nsym)
    gen = generator_poly(nsym)
    rem = [0] * nsym
    for byte in data:
        coef = byte ^ rem[0]
        rem = rem[1:] + [0]
        if coef:
            lc = GF_LOG[coef]
            for j in range(nsym):
                g = gen[j + 1]
                if g:
                    rem[j] ^= GF_EXP[lc + GF_LOG[g]]
    return bytes(rem)


def rs_syndromes(codeword: bytes, nsym: int) -> list[int]:
    synd = []
    for i in range(nsym):
        a = GF_EXP[i]
        la = GF_LOG[a]
        acc = 0
        for c in codeword:
            acc = (GF_EXP[GF_LOG[acc] + la] if acc else 0) ^ c
        synd.append(acc)
    return synd


def rs_decode(codeword: bytes, nsym: int) -> tuple[bytes, int]:
    """Correct up to nsym // 2 byte errors in a copy of ``codeword``.

    Returns ``(data, n_corrected)`` with the parity stripped.
    """
    n = len(codeword)
    _check_lengths(n, nsym)
    if n <= nsym:
        raise ValueError("codeword shorter than its parity")
    synd = rs_syndromes(codeword, nsym)
    if not any(synd):
        return bytes(codeword[: n - nsym]), 0

    # Berlekamp-Massey, polynomials lowest degree first
    lam = [1]
    prev = [1]
    L = 0
    m = 1
    b = 1
    for k in range(nsym):
        d = synd[k]
        for i in range(1, L + 1):
            if i < len(lam):
                d ^= gf_mul(lam[i], synd[k - i])
        if d == 0:
            m += 1
            continue
        coef = gf_div(d, b)
        shifted = [0] * m + [gf_mul(coef, p) for p in prev]
        new = lam + [0] * (len(shifted) - len(lam))
        for i, s in enumerate(shifted):
            new[i] ^= s
        if 2 * L <= k:
            prev = lam
            L = k + 1 - L
            b = d
            m = 1
        else:
            m += 1
        lam = new
    while len(lam) > 1 and lam[-1] == 0:
        lam.pop()
    if L * 2 > nsym or len(lam) - 1 != L:
        raise UncorrectableError("too many errors")

    # Chien search over the (possibly shortened) codeword positions
    positions = []
    for k in range(n):
        e = n - 1 - k
        acc = 0
        for i, c in enumerate(lam):
            if c:
                acc ^= GF_EXP[(GF_LOG[c] + (255 - e) * i) % 255]
        if acc == 0:
            positions.append(k)
    if len(positions) != L:
        raise UncorrectableError("error locator roots not found")

    # Forney: omega = S(x) * lambda(x) mod x^nsym
    omega = [0] * nsym
    for i, s in enumerate(synd):
        if s:
            for j, c in enumerate(lam):
                if i + j < nsym:
                    omega[i + j] ^= gf_mul(s, c)
    fixed = bytearray(codeword)
    for k in positions:
        e = n - 1 - k
        x = GF_EXP[e]
        x_inv = GF_EXP[(255 - e) % 255]
        num = 0
        xp = 1
        for c in omega:
            num ^= gf_mul(c, xp)
            xp = gf_mul(xp, x_inv)
        den = 0
        xp = 1
        for i in range(1, len(lam), 2):
            den ^= gf_mul(lam[i], xp)
            xp = gf_mul(xp, gf_mul(x_inv, x_inv))
        if den == 0:
            raise UncorrectableError("zero derivative in Forney step")
        fixed[k] ^= gf_mul(x, gf_div(num, den))
    if any(rs_syndromes(bytes(fixed), nsym)):
        raise UncorrectableError("correction did not yield a codeword")
    return bytes(fixed[: n - nsym]), L


@functools.lru_cache(maxsize=32)
def _basis(length: int, freqs: tuple[float, ...], sample_rate: float) -> np.ndarray:
    t = np.arange(length, dtype=np.float64)
    phase = 2.0 * np.pi * np.outer(t, np.asarray(freqs)) / sample_rate
    return np.concatenate([np.cos(phase), np.sin(phase)], axis=1)


def tone_energies(
    samples: np.ndarray,
    starts: np.ndarray,
    length: int,
    freqs: np.ndarray,
    sample_rate: float,
) -> np.ndarray:
    """|DFT|^2 of each window ``samples[s:s+length]`` at each frequency.

    Equivalent to running a Goertzel filter per (window, tone); done here as
    one matrix product against a cos/sin basis.
    """
    x = np.ascontiguousarray(samples, dtype=np.float64)
    starts = np.asarray(starts, dtype=np.int64)
    freqs = np.asarray(freqs, dtype=np.float64)
    if starts.size == 0:
        return np.zeros((0, freqs.size))
    if starts.min() < 0 or starts.max() + length > x.size:
        raise IndexError("window exceeds sample buffer")
    basis = _basis(length, tuple(freqs.tolist()), float(sample_rate))
    if starts.size > 1 and np.all(np.diff(starts) == length):
        frames = x[starts[0] : starts[0] + starts.size * length].reshape(starts.size, length)
    else:
        frames = np.lib.stride_tricks.sliding_window_view(x, length)[starts]
    proj = frames @ basis
    k = freqs.size
    return proj[:, :k] ** 2 + proj[:, k:] ** 2
