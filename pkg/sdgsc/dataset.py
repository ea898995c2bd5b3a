##############################################################################
# Copyright (c) 2026 sdgsc developers
# All rights reserved.
# Licensed under the New BSD License
# (http://www.freebsd.org/copyright/freebsd-license.html)
#
# Goal-oriented semantic video communication laboratory.
##############################################################################
"""Synthetic clips: coloured squares and discs moving over a dark textured
background.

Motion kinds:
  static            every frame identical
  linear            constant velocity, reflected at the borders
  jump              linear with one relocation at frame 3
  jump-at-frame-N   linear with one relocation at frame N-1 (1-based N)
"""
import numpy as np

from sdgsc import ParameterError
from sdgsc.consts import SPRITE_KINDS
from sdgsc.encoder import FrameSequence
from sdgsc.utils import DEBUG_OUTPUT

DEFAULT_JUMP_FRAME = 3


def jump_frame(kind):
    "0-based frame at which a jump clip relocates its shapes, or None"
    if kind == 'jump':
        return DEFAULT_JUMP_FRAME
    if kind.startswith('jump-at-frame-'):
        return int(kind[len('jump-at-frame-'):]) - 1
    return None


def background(h, w, rng):
    return (16 + rng.integers(0, 12, size=(h, w, 3))).astype(np.float64)


def _reflect(p, lo, hi):
    "fold p back into [lo, hi]"
    span = hi - lo
    if span <= 0:
        return lo
    q = (p - lo) % (2 * span)
    return lo + (q if q <= span else 2 * span - q)


def render(bg, shapes):
    """shapes are (row, col, size, colour[, kind]) with the top-left corner
    of the bounding box; kind is 'square' (default) or 'disc'"""
    frame = bg.copy()
    h, w = frame.shape[:2]
    rows, cols = np.mgrid[0:h, 0:w]
    for shape in shapes:
        row, col, size, colour = shape[:4]
        r0, c0 = int(round(row)), int(round(col))
        if len(shape) > 4 and shape[4] == 'disc':
            cy, cx = r0 + 0.5 * (size - 1), c0 + 0.5 * (size - 1)
            inside = (rows - cy) ** 2 + (cols - cx) ** 2 <= (0.5 * size) ** 2
            frame[inside] = colour
            continue
        r1, c1 = min(h, r0 + size), min(w, c0 + size)
        frame[max(r0, 0):r1, max(c0, 0):c1] = colour
    return frame


def gen_clip(frames, h, w, n_shapes, kind, speed, rng, sprites=SPRITE_KINDS):
    bg = background(h, w, rng)
    size = max(2, min(h, w) // 4)
    jf = jump_frame(kind)
    if jf is not None and not 1 <= jf < frames:
        raise ParameterError('jump frame %d outside clip of %d frames' % (
            jf, frames))
    states = []
    for i in range(n_shapes):
        pos = rng.uniform(0, [h - size, w - size])
        angle = rng.uniform(0, 2 * np.pi)
        vel = np.zeros(2) if kind == 'static' else \
            speed * np.array([np.sin(angle), np.cos(angle)])
        colour = rng.integers(120, 256, size=3).astype(np.float64)
        jump_to = rng.uniform(0, [h - size, w - size])
        sprite = sprites[int(rng.integers(0, len(sprites)))]
        states.append((pos, vel, colour, jump_to, sprite))
    out = np.empty((frames, h, w, 3))
    for f in range(frames):
        shapes = []
        for pos, vel, colour, jump_to, sprite in states:
            if jf is not None and f >= jf:
                p = jump_to + vel * (f - jf)
            else:
                p = pos + vel * f
            p = (_reflect(p[0], 0, h - size), _reflect(p[1], 0, w - size))
            shapes.append((p[0], p[1], size, colour, sprite))
        out[f] = render(bg, shapes)
    return FrameSequence.from_float(out)


def gen_synthetic(cfg, rng):
    "cfg['data.clips'] clips cycling through cfg['data.motion']"
    kinds = cfg['data.motion']
    clips = []
    for i in range(cfg['data.clips']):
        clips.append(gen_clip(cfg['data.frames'], cfg['data.height'],
                              cfg['data.width'], cfg['data.shapes'],
                              kinds[i % len(kinds)], cfg['data.speed'], rng,
                              cfg['data.sprites']))
    DEBUG_OUTPUT('gen_synthetic', len(clips), 'clips', kinds)
    return clips


def square_clip(frames, h, w, size, start, velocity, colour=(230, 40, 40),
                level=20):
    "one square translating by velocity (rows, cols) per frame on a flat background"
    bg = np.full((h, w, 3), float(level))
    out = np.empty((frames, h, w, 3))
    for f in range(frames):
        row = start[0] + velocity[0] * f
        col = start[1] + velocity[1] * f
        out[f] = render(bg, [(row, col, size, np.asarray(colour, float))])
    return FrameSequence.from_float(out)
