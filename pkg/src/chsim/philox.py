"""Counter-based random number generation for reproducible path simulation.

Every simulated path draws its noise from Philox4x64-10 blocks addressed by
``counter = [step, path, 0, 0]`` and ``key = [seed, STREAM_SALT]``.  One block
(four 64-bit words) is consumed per (path, step) pair and converted to three
standard normals via Box-Muller, so the draws at a given (seed, path, step)
never depend on how many paths or steps are requested alongside them.  This is
what makes the model-reduction identities exactly testable and path generation
safe to shard across workers.

The block function is bit-compatible with ``numpy.random.Philox`` given the
same counter and key (verified in the test suite).
"""

from __future__ import annotations

import hashlib

import numpy as np

_U64 = np.uint64
_MASK32 = _U64(0xFFFFFFFF)
_SH32 = _U64(32)
_SH11 = _U64(11)

# Philox4x64 multipliers and Weyl constants (Random123).
_M0 = _U64(0xD2E7470EE14C6C93)
_M1 = _U64(0xCA5A826395121157)
_W0 = 0x9E3779B97F4A7C15
_W1 = 0xBB67AE8584CAA73B

_ROUNDS = 10
_MOD64 = 1 << 64

# Distinguishes the path-noise stream from any future keyed stream.
STREAM_SALT = 0x434853494D2D5631

# Chunk bound keeps peak memory of the round intermediates modest.
_CHUNK = 1 << 19


def _mulhilo(a, b):
    """Full 64x64 -> 128 bit product as (high, low) uint64 words."""
    lo = a * b
    a_lo = a & _MASK32
    a_hi = a >> _SH32
    b_lo = b & _MASK32
    b_hi = b >> _SH32
    t = a_lo * b_lo
    t = a_hi * b_lo + (t >> _SH32)
    w1 = t >> _SH32
    t = a_lo * b_hi + (t & _MASK32)
    hi = a_hi * b_hi + w1 + (t >> _SH32)
    return hi, lo


def philox4x64(counter, key):
    """Apply Philox4x64-10 to blocks of counters.

    counter: uint64 array of shape (..., 4); key: pair of ints. Returns the
    four output words as an array of the same shape.
    """
    counter = np.asarray(counter, dtype=np.uint64)
    shape = counter.shape
    flat = counter.reshape(-1, 4)  # keeps word ops on arrays, not numpy scalars
    x0 = flat[:, 0].copy()
    x1 = flat[:, 1].copy()
    x2 = flat[:, 2].copy()
    x3 = flat[:, 3].copy()
    k0, k1 = int(key[0]) % _MOD64, int(key[1]) % _MOD64
    for r in range(_ROUNDS):
        rk0 = _U64((k0 + r * _W0) % _MOD64)
        rk1 = _U64((k1 + r * _W1) % _MOD64)
        hi0, lo0 = _mulhilo(_M0, x0)
        hi1, lo1 = _mulhilo(_M1, x2)
        x0 = hi1 ^ x1 ^ rk0
        x1 = lo1
        x2 = hi0 ^ x3 ^ rk1
        x3 = lo0
    out = np.empty_like(flat)
    out[:, 0] = x0
    out[:, 1] = x1
    out[:, 2] = x2
    out[:, 3] = x3
    return out.reshape(shape)


def _uniform01(words):
    # Top 53 bits, offset by half an ulp so u is strictly inside (0, 1).
    return ((words >> _SH11).astype(np.float64) + 0.5) * (2.0 ** -53)


def _block_normals(seed, paths, steps):
    """Three standard normals per (path, step) block, Box-Muller converted."""
    counter = np.zeros(paths.shape + (4,), dtype=np.uint64)
    counter[..., 0] = steps
    counter[..., 1] = paths
    words = philox4x64(counter, (seed, STREAM_SALT))
    u0 = _uniform01(words[..., 0])
    u1 = _uniform01(words[..., 1])
    u2 = _uniform01(words[..., 2])
    u3 = _uniform01(words[..., 3])
    r = np.sqrt(-2.0 * np.log(u0))
    ang = (2.0 * np.pi) * u1
    z1 = r * np.cos(ang)
    z2 = r * np.sin(ang)
    z3 = np.sqrt(-2.0 * np.log(u2)) * np.cos((2.0 * np.pi) * u3)
    return z1, z2, z3


def path_step_normals(seed, n_paths, n_steps, path_offset=0):
    """Noise arrays for a simulation run.

    Returns (z1, z2, z3), each of shape (n_steps, n_paths), where row t holds
    the step-t draws for every path.  ``path_offset`` shifts the path indices
    so that workers generating disjoint path ranges reproduce exactly what a
    single sequential run would produce.
    """
    z1 = np.empty((n_steps, n_paths))
    z2 = np.empty((n_steps, n_paths))
    z3 = np.empty((n_steps, n_paths))
    steps = np.arange(n_steps, dtype=np.uint64)[:, None]
    cols_per_chunk = max(1, _CHUNK // max(n_steps, 1))
    for lo in range(0, n_paths, cols_per_chunk):
        hi = min(lo + cols_per_chunk, n_paths)
        paths = np.arange(lo + path_offset, hi + path_offset, dtype=np.uint64)[None, :]
        p, s = np.broadcast_arrays(paths, steps)
        a, b, c = _block_normals(seed, p, s)
        z1[:, lo:hi] = a
        z2[:, lo:hi] = b
        z3[:, lo:hi] = c
    return z1, z2, z3


def derive_seed(seed, purpose):
    """Derive an independent 64-bit seed from a master seed and a purpose tag.

    All toolkit randomness flows from one user seed; subsystems get their own
    streams through this keyed hash so that adding a consumer never perturbs
    the draws of another.
    """
    h = hashlib.sha256()
    h.update(int(seed).to_bytes(8, "little", signed=False))
    h.update(purpose.encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little")
