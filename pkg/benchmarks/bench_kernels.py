"""Compare the compiled and pure-Python modem kernels.

Per-kernel timings call each backend module directly.  The end-to-end
loopback (modulate + demodulate a 41-byte VERIFY frame) runs in a fresh
interpreter per ``PAIRSONIC_KERNELS`` mode, because the backend is chosen
once at import.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""

from __future__ import annotations

import argparse
import json
import os
import random
import subprocess
import sys
import timeit

import numpy as np

from pairsonic.modem import kernels

LOOPBACK = """
import random, timeit
from pairsonic.modem import ModemConfig, demodulate, kernels, modulate
cfg = ModemConfig()
payload = random.Random(1).randbytes(41)
pcm = modulate(cfg, payload)
assert [p for p, _ in demodulate(cfg, pcm)] == [payload]
t = min(timeit.repeat(lambda: demodulate(cfg, pcm), number=5, repeat={repeat})) / 5
print(kernels.BACKEND, t)
"""


def kernel_cases(rng: random.Random):
    data = rng.randbytes(200)
    parity = 8
    clean = data + kernels.available_backends()["python"].rs_encode(data, parity)
    noisy = bytearray(clean)
    for p in rng.sample(range(len(noisy)), parity // 2):
        noisy[p] ^= rng.randint(1, 255)
    noisy = bytes(noisy)

    x = np.random.default_rng(0).normal(size=48000 * 4)
    n = 3072
    starts = np.arange(0, x.size - n, n // 4, dtype=np.int64)
    freqs = np.array(sorted({1875 + (k + 0.5) * 140.625 for k in range(32)}))

    return {
        "rs_encode (200+8 B)": lambda m: m.rs_encode(data, parity),
        "rs_syndromes (clean)": lambda m: m.rs_syndromes(clean, parity),
        "rs_decode (4 errors)": lambda m: m.rs_decode(noisy, parity),
        f"tone_energies ({starts.size}x32)": lambda m: m.tone_energies(x, starts, n, freqs, 48000.0),
    }


def time_kernels(repeat: int) -> list[dict]:
    backends = kernels.available_backends()
    rows = []
    for name, fn in kernel_cases(random.Random(7)).items():
        row = {"kernel": name}
        for backend, module in backends.items():
            timer = timeit.Timer(lambda: fn(module))
            number, _ = timer.autorange()
            row[backend] = min(timer.repeat(repeat=repeat, number=number)) / number
        rows.append(row)
    return rows


def time_loopback(repeat: int) -> dict[str, float]:
    modes = ["python"] + (["cython", "auto"] if "cython" in kernels.available_backends() else [])
    out = {}
    for mode in modes:
        env = dict(os.environ, PAIRSONIC_KERNELS=mode)
        res = subprocess.run([sys.executable, "-c", LOOPBACK.format(repeat=repeat)], env=env,
                             capture_output=True, text=True, check=True)
        backend, seconds = res.stdout.split()
        out[f"{mode} ({backend})"] = float(seconds)
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write the results here")
    args = ap.parse_args(argv)

    rows = time_kernels(args.repeat)
    backends = [b for b in ("python", "cython") if b in rows[0]]
    print(f"{'kernel':28}" + "".join(f"{b:>14}" for b in backends) + ("   speedup" if len(backends) > 1 else ""))
    for row in rows:
        line = f"{row['kernel']:28}" + "".join(f"{1e6 * row[b]:11.1f} us" for b in backends)
        if len(backends) > 1:
            line += f"   {row['python'] / row['cython']:6.1f}x"
        print(line)
    if len(backends) == 1:
        print("(compiled extension not built; only the Python backend was timed)")

    loop = time_loopback(args.repeat)
    print("\ndemodulate one 41-byte frame (3.7 s of audio)")
    for mode, seconds in loop.items():
        print(f"  {mode:40} {1e3 * seconds:8.2f} ms")

    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"kernels": rows, "loopback": loop}, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
