##############################################################################
# Copyright (c) 2026 sdgsc developers
# All rights reserved.
# Licensed under the New BSD License
# (http://www.freebsd.org/copyright/freebsd-license.html)
#
# Goal-oriented semantic video communication laboratory.
##############################################################################
"""FrameSequence files.

.fsq:  "FSQ1"  u32 F  u32 H  u32 W  u32 C  (little endian), then the
raw uint8 pixels frame-major.  Single frames go in and out as binary
PPM (P6, maxval 255).
"""
import os

import numpy as np

from sdgsc import FormatError, ShapeError
from sdgsc.consts import FSQ_MAGIC, FRAME_CHANNELS
from sdgsc.encoder import FrameSequence
from sdgsc.utils import ByteReader, int_to_bytes, DEBUG_OUTPUT


def dumps_fsq(seq):
    head = FSQ_MAGIC + b''.join(int_to_bytes(n, 4) for n in seq.pixels.shape)
    return head + np.ascontiguousarray(seq.pixels, dtype=np.uint8).tobytes()


def read_fsq_from(f, name='fsq'):
    r = ByteReader(f, name)
    if r.read(4) != FSQ_MAGIC:
        raise FormatError('%s: not a frame sequence (bad magic)' % (name, ))
    shape = tuple(r.read_u32() for i in range(4))
    count = int(np.prod(shape, dtype=np.int64))
    pixels = np.frombuffer(r.read(count), dtype=np.uint8).reshape(shape)
    if not r.at_end():
        raise FormatError('%s: trailing bytes after pixels' % (name, ))
    return FrameSequence(pixels.copy())


def write_fsq(path, seq):
    DEBUG_OUTPUT('write_fsq', path, seq.pixels.shape)
    with open(path, 'wb') as f:
        f.write(dumps_fsq(seq))


def read_fsq(path):
    with open(path, 'rb') as f:
        return read_fsq_from(f, path)


def dumps_ppm(frame):
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[2] != FRAME_CHANNELS:
        raise ShapeError('ppm frame must be HxWx3', frame.shape)
    h, w = frame.shape[:2]
    head = ('P6\n%d %d\n255\n' % (w, h)).encode('ascii')
    return head + np.ascontiguousarray(frame, dtype=np.uint8).tobytes()


def _ppm_tokens(data, count):
    "first count header tokens of a PPM and the offset past them"
    tokens = []
    pos = 0
    while len(tokens) < count:
        if pos >= len(data):
            raise FormatError('truncated PPM header')
        c = data[pos:pos + 1]
        if c == b'#':
            while pos < len(data) and data[pos:pos + 1] != b'\n':
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(data) and not data[pos:pos + 1].isspace():
                pos += 1
            tokens.append(data[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    return tokens, pos + 1


def loads_ppm(data, name='ppm'):
    tokens, pos = _ppm_tokens(data, 4)
    if tokens[0] != b'P6':
        raise FormatError('%s: not a binary PPM' % (name, ))
    try:
        w, h, maxval = [int(t) for t in tokens[1:]]
    except ValueError:
        raise FormatError('%s: bad PPM header %r' % (name, tokens))
    if maxval != 255:
        raise FormatError('%s: unsupported maxval %d' % (name, maxval))
    raster = data[pos:pos + w * h * FRAME_CHANNELS]
    if len(raster) != w * h * FRAME_CHANNELS:
        raise FormatError('%s: short PPM raster' % (name, ))
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w, FRAME_CHANNELS)


def write_ppm(path, frame):
    with open(path, 'wb') as f:
        f.write(dumps_ppm(frame))


def read_ppm(path):
    with open(path, 'rb') as f:
        return loads_ppm(f.read(), path).copy()


def export_ppm_frames(seq, directory, prefix='frame'):
    paths = []
    for i, frame in enumerate(seq.pixels):
        path = os.path.join(directory, '%s_%04d.ppm' % (prefix, i))
        write_ppm(path, frame)
        paths.append(path)
    return paths


def import_ppm_frames(paths):
    return FrameSequence(np.stack([read_ppm(p) for p in paths]))
