##############################################################################
# Copyright (c) 2026 sdgsc developers
# All rights reserved.
# Licensed under the New BSD License
# (http://www.freebsd.org/copyright/freebsd-license.html)
#
# Goal-oriented semantic video communication laboratory.
##############################################################################
import logging
import struct

import numpy as np

from sdgsc import FormatError

DEBUG = False

logger = logging.getLogger('sdgsc')


def DEBUG_OUTPUT(*argv):
    if not DEBUG:
        return
    logger.debug(' '.join(str(a) for a in argv))


def set_debug(flag):
    global DEBUG
    DEBUG = bool(flag)
    if DEBUG and not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter('%(name)s: %(message)s'))
        logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if DEBUG else logging.WARNING)


def bytes_to_int(b, u=True):            # Read as little endian.
    if u:
        fmtmap = {1: 'B', 2: '<H', 4: '<L', 8: '<Q'}
    else:
        fmtmap = {1: 'b', 2: '<h', 4: '<l', 8: '<q'}
    fmt = fmtmap.get(len(b))
    if fmt is None:
        raise FormatError('no integer of width %d' % (len(b), ))
    return struct.unpack(fmt, b)[0]


def int_to_bytes(val, nbytes, u=True):  # Convert int value to little endian bytes.
    if u:
        fmtmap = {1: 'B', 2: '<H', 4: '<L', 8: '<Q'}
    else:
        fmtmap = {1: 'b', 2: '<h', 4: '<l', 8: '<q'}
    fmt = fmtmap.get(nbytes)
    if fmt is None:
        raise FormatError('no integer of width %d' % (nbytes, ))
    try:
        return struct.pack(fmt, val)
    except struct.error:
        raise FormatError('%d does not fit in %d bytes' % (val, nbytes))


class ByteReader(object):
    """Sequential reader over a binary file object."""
    def __init__(self, f, name='stream'):
        self._f = f
        self.name = name

    def read(self, nbytes):
        b = self._f.read(nbytes)
        if len(b) != nbytes:
            raise FormatError('%s: short read (%d of %d bytes)' % (
                self.name, len(b), nbytes))
        return b

    def read_u32(self):
        return bytes_to_int(self.read(4))

    def read_u64(self):
        return bytes_to_int(self.read(8))

    def read_f64(self, count):
        return np.frombuffer(self.read(8 * count), dtype='<f8').astype(
            np.float64)

    def at_end(self):
        return self._f.read(1) == b''


def as_array(x):
    return np.asarray(x, dtype=np.float64)


def split_rng(rng, n):
    "Independent child generators drawn from rng."
    seeds = rng.integers(0, 2**63, size=n)
    return [np.random.default_rng(int(s)) for s in seeds]


def trial_seed(base, *keys):
    "Counter-based seed for (base, keys...)."
    ss = np.random.SeedSequence([int(base)] + [int(k) for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def stage_rng(seed, *keys):
    return np.random.default_rng(trial_seed(seed, *keys))
