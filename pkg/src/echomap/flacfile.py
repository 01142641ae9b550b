"""Pure-Python FLAC reader.

The sandbox this package targets has no libsndfile/ffmpeg, so FLAC support is
implemented directly against the format: STREAMINFO probing plus full frame
decoding (constant, verbatim, fixed and LPC subframes, Rice/escape residuals,
all stereo decorrelation modes). Decoding is exact integer arithmetic; output
is int32 PCM at the stream's bit depth.

This is a correctness-first reader. Throughput is adequate for desk-scale
datasets, not for re-decoding multi-TB archives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AudioDecodeError

_MAGIC = b"fLaC"

_BLOCKSIZE_TABLE = {
    1: 192, 2: 576, 3: 1152, 4: 2304, 5: 4608,
    8: 256, 9: 512, 10: 1024, 11: 2048, 12: 4096,
    13: 8192, 14: 16384, 15: 32768,
}
_SAMPLE_RATE_TABLE = {
    1: 88200, 2: 176400, 3: 192000, 4: 8000, 5: 16000, 6: 22050,
    7: 24000, 8: 32000, 9: 44100, 10: 48000, 11: 96000,
}
_SAMPLE_SIZE_TABLE = {1: 8, 2: 12, 4: 16, 5: 20, 6: 24}

def _crc8(data: bytes) -> int:
    crc = 0
    for b in data:
        crc ^= b
        for _ in range(8):
            crc = ((crc << 1) ^ 0x07) & 0xFF if crc & 0x80 else (crc << 1) & 0xFF
    return crc


def _crc16(data: bytes) -> int:
    crc = 0
    for b in data:
        crc ^= b << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x8005) & 0xFFFF if crc & 0x8000 else (crc << 1) & 0xFFFF
    return crc


class _BitReader:
    """MSB-first bit reader over a bytes object."""

    __slots__ = ("data", "pos", "acc", "nbits")

    def __init__(self, data: bytes, byte_offset: int = 0):
        self.data = data
        self.pos = byte_offset
        self.acc = 0
        self.nbits = 0

    def byte_position(self) -> int:
        """Byte offset of the next unconsumed bit; only valid when aligned."""
        return self.pos - self.nbits // 8

    def _fill(self, need: int) -> None:
        while self.nbits < need:
            chunk = self.data[self.pos:self.pos + 8]
            if not chunk:
                raise AudioDecodeError("truncated FLAC stream")
            self.acc = (self.acc << (8 * len(chunk))) | int.from_bytes(chunk, "big")
            self.nbits += 8 * len(chunk)
            self.pos += len(chunk)

    def read(self, n: int) -> int:
        if n == 0:
            return 0
        self._fill(n)
        self.nbits -= n
        out = self.acc >> self.nbits
        self.acc &= (1 << self.nbits) - 1
        return out

    def read_signed(self, n: int) -> int:
        v = self.read(n)
        return v - (1 << n) if v >> (n - 1) else v

    def read_unary(self) -> int:
        q = 0
        while True:
            if self.nbits == 0:
                self._fill(1)
            top = self.acc.bit_length()
            if top == 0:
                q += self.nbits
                self.nbits = 0
                continue
            q += self.nbits - top
            self.nbits = top - 1
            self.acc &= (1 << self.nbits) - 1
            return q

    def align(self) -> None:
        self.read(self.nbits % 8)


@dataclass(frozen=True)
class StreamInfo:
    sample_rate: int
    channels: int
    bits_per_sample: int
    total_samples: int  # 0 means unknown


def _parse_stream_info(data: bytes) -> tuple[StreamInfo, int]:
    """Parse metadata blocks; return STREAMINFO and the first frame offset."""
    if data[:4] != _MAGIC:
        raise AudioDecodeError("not a FLAC stream (bad magic)")
    pos = 4
    info = None
    while True:
        if pos + 4 > len(data):
            raise AudioDecodeError("truncated FLAC metadata")
        header = data[pos]
        last = bool(header & 0x80)
        block_type = header & 0x7F
        length = int.from_bytes(data[pos + 1:pos + 4], "big")
        body = data[pos + 4:pos + 4 + length]
        if len(body) < length:
            raise AudioDecodeError("truncated FLAC metadata block")
        if block_type == 0:
            if length < 34:
                raise AudioDecodeError("short STREAMINFO block")
            r = _BitReader(body)
            r.read(16)  # min blocksize
            r.read(16)  # max blocksize
            r.read(24)  # min framesize
            r.read(24)  # max framesize
            sample_rate = r.read(20)
            channels = r.read(3) + 1
            bps = r.read(5) + 1
            total = r.read(36)
            if sample_rate == 0:
                raise AudioDecodeError("FLAC STREAMINFO declares zero sample rate")
            info = StreamInfo(sample_rate, channels, bps, total)
        pos += 4 + length
        if last:
            break
    if info is None:
        raise AudioDecodeError("FLAC stream without STREAMINFO")
    return info, pos


def probe(path) -> StreamInfo:
    """Read only the metadata blocks and return the stream parameters."""
    with open(path, "rb") as fh:
        head = fh.read(65536)
    info, _ = _parse_stream_info(head)
    return info


def _read_coded_number(r: _BitReader) -> int:
    first = r.read(8)
    if first < 0x80:
        return first
    n_extra = 0
    mask = 0x40
    while first & mask:
        n_extra += 1
        mask >>= 1
    if n_extra == 0 or n_extra > 6:
        raise AudioDecodeError("invalid UTF-8 coded number in frame header")
    value = first & (mask - 1)
    for _ in range(n_extra):
        byte = r.read(8)
        if byte & 0xC0 != 0x80:
            raise AudioDecodeError("invalid UTF-8 continuation in frame header")
        value = (value << 6) | (byte & 0x3F)
    return value


def _decode_residual(r: _BitReader, blocksize: int, order: int) -> list[int]:
    method = r.read(2)
    if method > 1:
        raise AudioDecodeError("reserved residual coding method")
    param_bits = 4 if method == 0 else 5
    escape = (1 << param_bits) - 1
    part_order = r.read(4)
    n_parts = 1 << part_order
    if blocksize % n_parts:
        raise AudioDecodeError("blocksize not divisible by rice partition count")
    residual: list[int] = []
    for part in range(n_parts):
        count = blocksize >> part_order
        if part == 0:
            count -= order
        if count < 0:
            raise AudioDecodeError("invalid rice partition layout")
        param = r.read(param_bits)
        if param == escape:
            raw_bits = r.read(5)
            if raw_bits == 0:
                residual.extend([0] * count)
            else:
                residual.extend(r.read_signed(raw_bits) for _ in range(count))
        else:
            read_unary = r.read_unary
            read = r.read
            for _ in range(count):
                q = read_unary()
                u = (q << param) | read(param) if param else q
                residual.append((u >> 1) ^ -(u & 1))
    return residual


def _restore_fixed(warmup: list[int], residual: list[int], order: int) -> np.ndarray:
    seq = np.asarray(residual, dtype=np.int64)
    warm = np.asarray(warmup, dtype=np.int64)
    for level in range(order, 0, -1):
        init = np.diff(warm, n=level - 1)[-1]
        seq = np.cumsum(np.concatenate(([init], seq)))[1:]
    return np.concatenate((warm, seq))


def _restore_lpc(warmup: list[int], residual: list[int],
                 coeffs: list[int], shift: int) -> np.ndarray:
    # Sequential integer recurrence; plain Python ints keep the arithmetic exact.
    out = list(warmup)
    order = len(coeffs)
    for res in residual:
        acc = 0
        for j, c in enumerate(coeffs):
            acc += c * out[-1 - j]
        out.append(res + (acc >> shift))
    return np.asarray(out, dtype=np.int64)


def _decode_subframe(r: _BitReader, blocksize: int, bps: int) -> np.ndarray:
    if r.read(1):
        raise AudioDecodeError("subframe padding bit set")
    sf_type = r.read(6)
    wasted = 0
    if r.read(1):
        wasted = r.read_unary() + 1
    eff_bps = bps - wasted
    if eff_bps <= 0:
        raise AudioDecodeError("wasted bits exceed sample size")

    if sf_type == 0:
        value = r.read_signed(eff_bps)
        samples = np.full(blocksize, value, dtype=np.int64)
    elif sf_type == 1:
        samples = np.fromiter(
            (r.read_signed(eff_bps) for _ in range(blocksize)),
            dtype=np.int64, count=blocksize)
    elif 8 <= sf_type <= 12:
        order = sf_type & 0x07
        warmup = [r.read_signed(eff_bps) for _ in range(order)]
        residual = _decode_residual(r, blocksize, order)
        samples = _restore_fixed(warmup, residual, order)
    elif sf_type >= 32:
        order = (sf_type & 0x1F) + 1
        warmup = [r.read_signed(eff_bps) for _ in range(order)]
        precision = r.read(4) + 1
        if precision == 16:
            raise AudioDecodeError("invalid LPC coefficient precision")
        shift = r.read_signed(5)
        if shift < 0:
            raise AudioDecodeError("negative LPC shift")
        coeffs = [r.read_signed(precision) for _ in range(order)]
        residual = _decode_residual(r, blocksize, order)
        samples = _restore_lpc(warmup, residual, coeffs, shift)
    else:
        raise AudioDecodeError(f"reserved subframe type {sf_type}")

    if wasted:
        samples = samples << wasted
    return samples


def _decode_frame(r: _BitReader, info: StreamInfo) -> np.ndarray:
    header_start = r.byte_position()
    sync = r.read(14)
    if sync != 0x3FFE:
        raise AudioDecodeError("lost FLAC frame sync")
    if r.read(1):
        raise AudioDecodeError("reserved frame header bit set")
    r.read(1)  # blocking strategy
    bs_code = r.read(4)
    sr_code = r.read(4)
    chan_code = r.read(4)
    size_code = r.read(3)
    if r.read(1):
        raise AudioDecodeError("reserved frame header bit set")
    _read_coded_number(r)

    if bs_code == 0:
        raise AudioDecodeError("reserved blocksize code")
    elif bs_code == 6:
        blocksize = r.read(8) + 1
    elif bs_code == 7:
        blocksize = r.read(16) + 1
    else:
        blocksize = _BLOCKSIZE_TABLE[bs_code]

    if sr_code == 12:
        r.read(8)
    elif sr_code in (13, 14):
        r.read(16)
    elif sr_code == 15:
        raise AudioDecodeError("invalid sample rate code")

    if size_code == 0:
        bps = info.bits_per_sample
    elif size_code in _SAMPLE_SIZE_TABLE:
        bps = _SAMPLE_SIZE_TABLE[size_code]
    else:
        raise AudioDecodeError("reserved sample size code")

    header_end = r.byte_position()
    stored_crc8 = r.read(8)
    if _crc8(r.data[header_start:header_end]) != stored_crc8:
        raise AudioDecodeError("FLAC frame header CRC mismatch")

    if chan_code <= 7:
        n_channels = chan_code + 1
        if n_channels != info.channels:
            raise AudioDecodeError("frame channel count disagrees with STREAMINFO")
        channels = [_decode_subframe(r, blocksize, bps) for _ in range(n_channels)]
        frame = np.stack(channels, axis=1)
    elif chan_code in (8, 9, 10):
        if info.channels != 2:
            raise AudioDecodeError("stereo decorrelation in non-stereo stream")
        if chan_code == 8:  # left/side
            left = _decode_subframe(r, blocksize, bps)
            side = _decode_subframe(r, blocksize, bps + 1)
            frame = np.stack((left, left - side), axis=1)
        elif chan_code == 9:  # right/side
            side = _decode_subframe(r, blocksize, bps + 1)
            right = _decode_subframe(r, blocksize, bps)
            frame = np.stack((right + side, right), axis=1)
        else:  # mid/side
            mid = _decode_subframe(r, blocksize, bps)
            side = _decode_subframe(r, blocksize, bps + 1)
            mid = (mid << 1) | (side & 1)
            frame = np.stack(((mid + side) >> 1, (mid - side) >> 1), axis=1)
    else:
        raise AudioDecodeError("reserved channel assignment")

    r.align()
    crc_pos = r.byte_position()
    stored_crc16 = r.read(16)
    if _crc16(r.data[header_start:crc_pos]) != stored_crc16:
        raise AudioDecodeError("FLAC frame CRC mismatch")
    return frame


def read(path) -> tuple[np.ndarray, int, int]:
    """Decode a FLAC file.

    Returns (samples, sample_rate, bits_per_sample) with samples shaped
    (n_frames, n_channels) as int32.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    info, frame_offset = _parse_stream_info(data)
    reader = _BitReader(data, frame_offset)
    frames = []
    decoded = 0
    while True:
        if info.total_samples and decoded >= info.total_samples:
            break
        if reader.byte_position() >= len(data):
            break
        frame = _decode_frame(reader, info)
        frames.append(frame)
        decoded += frame.shape[0]
    if not frames:
        raise AudioDecodeError("FLAC stream contains no audio frames")
    samples = np.concatenate(frames, axis=0)
    if info.total_samples:
        if samples.shape[0] < info.total_samples:
            raise AudioDecodeError("FLAC stream shorter than STREAMINFO declares")
        samples = samples[:info.total_samples]
    return samples.astype(np.int32), info.sample_rate, info.bits_per_sample
