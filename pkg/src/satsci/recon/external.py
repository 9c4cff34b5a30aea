"""Child-process denoiser speaking the binary cube format over stdin/stdout.

Each request is an 8-byte little-endian float64 strength followed by one cube
record; the child answers with one cube record of the same dimensions.
"""
from __future__ import annotations

import os
import selectors
import shlex
import struct
import subprocess
import sys
import time

import numpy as np

from ..errors import DenoiserError, ValidationError
from ..harness.formats import CUBE_MAGIC, HEADER, decode_cube, encode_cube, payload_size, read_header

STRENGTH = struct.Struct("<d")


class ExternalDenoiser:
    name = "external"

    def __init__(self, command, timeout: float = 30.0):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self._proc = None

    def _start(self):
        try:
            self._proc = subprocess.Popen(self.command, stdin=subprocess.PIPE,
                                          stdout=subprocess.PIPE, stderr=subprocess.DEVNULL)
        except OSError as exc:
            raise DenoiserError(f"cannot start external denoiser: {exc}") from exc

    def _read_exact(self, size: int, deadline: float) -> bytes:
        fd = self._proc.stdout.fileno()
        buf = bytearray()
        with selectors.DefaultSelector() as sel:
            sel.register(fd, selectors.EVENT_READ)
            while len(buf) < size:
                left = deadline - time.monotonic()
                if left <= 0 or not sel.select(left):
                    raise DenoiserError(f"external denoiser timed out after {self.timeout}s")
                chunk = os.read(fd, size - len(buf))
                if not chunk:
                    raise DenoiserError("external denoiser closed its output")
                buf += chunk
        return bytes(buf)

    def __call__(self, s, strength: float):
        if strength == 0:
            return np.array(s, dtype=np.float64, copy=True)
        if self._proc is None or self._proc.poll() is not None:
            self._start()
        deadline = time.monotonic() + self.timeout
        try:
            self._proc.stdin.write(STRENGTH.pack(float(strength)) + encode_cube(s))
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            self.close()
            raise DenoiserError(f"external denoiser rejected input: {exc}") from exc
        try:
            head = self._read_exact(HEADER.size, deadline)
            magic, n1, n2, B, dtype = read_header(head)
            if magic != CUBE_MAGIC or (n1, n2, B) != tuple(np.shape(s)):
                raise DenoiserError(f"external denoiser answered with dims {(n1, n2, B)}")
            body = self._read_exact(payload_size(n1, n2, B, dtype), deadline)
        except (DenoiserError, ValidationError) as exc:
            self.close()
            if isinstance(exc, DenoiserError):
                raise
            raise DenoiserError(f"malformed external denoiser reply: {exc}") from exc
        return decode_cube(head + body)

    def close(self):
        if self._proc is not None:
            self._proc.kill()
            self._proc.wait()
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def describe(self) -> dict:
        return {"name": self.name, "command": self.command, "timeout": self.timeout}


def serve(denoise, stdin=None, stdout=None) -> None:
    """Loop answering requests with ``denoise(cube, strength)`` until EOF."""
    stdin = stdin or sys.stdin.buffer
    stdout = stdout or sys.stdout.buffer
    while True:
        raw = stdin.read(STRENGTH.size)
        if len(raw) < STRENGTH.size:
            return
        (strength,) = STRENGTH.unpack(raw)
        head = stdin.read(HEADER.size)
        _, n1, n2, B, dtype = read_header(head)
        body = stdin.read(payload_size(n1, n2, B, dtype))
        out = denoise(decode_cube(head + body), strength)
        stdout.write(encode_cube(out))
        stdout.flush()


def main(argv=None) -> None:
    import argparse

    from .tv import TvDenoiser

    ap = argparse.ArgumentParser(description="reference external denoiser process")
    ap.add_argument("--kind", choices=["tv", "identity", "sleep"], default="tv")
    ap.add_argument("--inner-iters", type=int, default=20)
    args = ap.parse_args(argv)
    if args.kind == "tv":
        fn = TvDenoiser(args.inner_iters)
    elif args.kind == "sleep":
        def fn(s, strength):
            time.sleep(3600)
    else:
        def fn(s, strength):
            return s
    serve(fn)


if __name__ == "__main__":
    main()
