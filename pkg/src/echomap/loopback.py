"""Reference child process for the external-backend wire protocol.

Echoes the first `dim` samples of every frame back as the embedding, which
makes round-trips byte-exact and the protocol testable without model weights.

Run as:  python -m echomap.loopback --dim 16 --sample-rate 16000 --window-samples 64

Flags --die-after and --sleep exist to exercise the failure paths.
"""

from __future__ import annotations

import argparse
import struct
import sys
import time


def _read_exact(stream, count: int) -> bytes:
    chunks = []
    remaining = count
    while remaining > 0:
        part = stream.read(remaining)
        if not part:
            return b""
        chunks.append(part)
        remaining -= len(part)
    return b"".join(chunks)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dim", type=int, required=True)
    parser.add_argument("--sample-rate", type=int, required=True)
    parser.add_argument("--window-samples", type=int, required=True)
    parser.add_argument("--die-after", type=int, default=-1,
                        help="exit abruptly after N frames (test hook)")
    parser.add_argument("--sleep", type=float, default=0.0,
                        help="seconds to sleep per frame (test hook)")
    args = parser.parse_args(argv)

    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer
    stdout.write(f"EMBED v1 {args.dim} {args.sample_rate} {args.window_samples}\n".encode())
    stdout.flush()

    frames_seen = 0
    while True:
        header = _read_exact(stdin, 4)
        if not header:
            return 0
        count = struct.unpack("<I", header)[0]
        payload = _read_exact(stdin, 4 * count)
        if len(payload) < 4 * count:
            return 1
        if args.die_after >= 0 and frames_seen >= args.die_after:
            return 3
        if args.sleep:
            time.sleep(args.sleep)
        reply = payload[:4 * args.dim]
        reply += b"\x00" * (4 * args.dim - len(reply))
        stdout.write(struct.pack("<I", args.dim))
        stdout.write(reply)
        stdout.flush()
        frames_seen += 1


if __name__ == "__main__":
    sys.exit(main())
