##############################################################################
# Copyright (c) 2026 sdgsc developers
# All rights reserved.
# Licensed under the New BSD License
# (http://www.freebsd.org/copyright/freebsd-license.html)
#
# Goal-oriented semantic video communication laboratory.
##############################################################################
"""MlpModel checkpoint files.

    "SDGC"  u32 version  u32 L  u32 widths[L+1]  u32 act  u32 out_act
    u64 seed  u32 n  n bytes of utf-8 "key=value" lines
    parameters as <f8 in parameters() order

Integers are little endian.
"""
import numpy as np

from sdgsc import FormatError
from sdgsc.consts import CHECKPOINT_MAGIC, CHECKPOINT_VERSION, ACTIVATIONS
from sdgsc.ndnet import MlpModel
from sdgsc.utils import ByteReader, int_to_bytes, DEBUG_OUTPUT


def _encode_header(header):
    lines = []
    for key in sorted(header):
        value = str(header[key])
        if '=' in key or '\n' in key or '\n' in value:
            raise FormatError('header field %r cannot be encoded' % (key, ))
        lines.append('%s=%s' % (key, value))
    return '\n'.join(lines).encode('utf-8')


def _decode_header(b):
    header = {}
    if not b:
        return header
    for line in b.decode('utf-8').split('\n'):
        key, sep, value = line.partition('=')
        if not sep:
            raise FormatError('bad header line %r' % (line, ))
        header[key] = value
    return header


def dumps_model(model, header=None):
    extra = _encode_header(header or {})
    buf = [
        CHECKPOINT_MAGIC,
        int_to_bytes(CHECKPOINT_VERSION, 4),
        int_to_bytes(model.n_layers, 4),
    ]
    buf += [int_to_bytes(w, 4) for w in model.widths]
    buf.append(int_to_bytes(ACTIVATIONS.index(model.activation), 4))
    buf.append(int_to_bytes(ACTIVATIONS.index(model.output_activation), 4))
    buf.append(int_to_bytes(model.seed, 8))
    buf.append(int_to_bytes(len(extra), 4))
    buf.append(extra)
    for p in model.parameters():
        buf.append(np.ascontiguousarray(p, dtype='<f8').tobytes())
    return b''.join(buf)


def _read_head(r):
    if r.read(4) != CHECKPOINT_MAGIC:
        raise FormatError('%s: not a checkpoint (bad magic)' % (r.name, ))
    version = r.read_u32()
    if version != CHECKPOINT_VERSION:
        raise FormatError('%s: unsupported checkpoint version %d' % (
            r.name, version))
    n_layers = r.read_u32()
    if n_layers < 1 or n_layers > 1024:
        raise FormatError('%s: bad layer count %d' % (r.name, n_layers))
    widths = [r.read_u32() for i in range(n_layers + 1)]
    codes = r.read_u32(), r.read_u32()
    if max(codes) >= len(ACTIVATIONS):
        raise FormatError('%s: bad activation code %r' % (r.name, codes))
    seed = r.read_u64()
    header = _decode_header(r.read(r.read_u32()))
    return {
        'version': version,
        'widths': widths,
        'activation': ACTIVATIONS[codes[0]],
        'output_activation': ACTIVATIONS[codes[1]],
        'seed': seed,
        'header': header,
    }


def load_model_from(f, name='checkpoint'):
    r = ByteReader(f, name)
    head = _read_head(r)
    widths = head['widths']
    params = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        params.append(r.read_f64(fan_in * fan_out).reshape(fan_in, fan_out))
        params.append(r.read_f64(fan_out))
    if not r.at_end():
        raise FormatError('%s: trailing bytes after parameters' % (name, ))
    model = MlpModel(widths, head['activation'], head['output_activation'],
                     head['seed'], params=params)
    return model, head['header']


def save_model(path, model, header=None):
    DEBUG_OUTPUT('save_model', path, model)
    with open(path, 'wb') as f:
        f.write(dumps_model(model, header))


def load_model(path):
    with open(path, 'rb') as f:
        return load_model_from(f, path)


def inspect_checkpoint(path):
    "checkpoint summary without the parameter payload"
    with open(path, 'rb') as f:
        head = _read_head(ByteReader(f, path))
    widths = head['widths']
    head['n_params'] = sum(a * b + b for a, b in zip(widths[:-1], widths[1:]))
    return head
