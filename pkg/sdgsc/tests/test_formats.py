import io
import os
import unittest

import numpy as np

from sdgsc import FormatError, ShapeError
from sdgsc.checkpoint import (
    dumps_model, load_model_from, save_model, load_model, inspect_checkpoint,
)
from sdgsc.encoder import FrameSequence
from sdgsc.frameio import (
    dumps_fsq, read_fsq_from, write_fsq, read_fsq, dumps_ppm, loads_ppm,
    export_ppm_frames, import_ppm_frames,
)
from sdgsc.ndnet import MlpModel, forward
from sdgsc.utils import bytes_to_int, int_to_bytes
from sdgsc.tests.base import TestBase


class TestIntegers(TestBase):
    def test_little_endian(self):
        self.assertEqual(int_to_bytes(1, 4), b'\x01\x00\x00\x00')
        self.assertEqual(bytes_to_int(b'\x00\x01'), 256)
        self.assertEqual(bytes_to_int(b'\xff', u=False), -1)
        self.assertRaises(FormatError, int_to_bytes, 256, 1)
        self.assertRaises(FormatError, bytes_to_int, b'\x00\x00\x00')


class TestCheckpoint(TestBase):
    def test_round_trip(self):
        m = MlpModel([5, 7, 3], 'relu', 'sigmoid', seed=77)
        path = os.path.join(self.tempdir(), 'm.sdgc')
        save_model(path, m, {'stage': 'ae', 'frame': '8x8x3'})
        loaded, header = load_model(path)
        self.assertTrue(loaded.same_parameters(m))
        self.assertEqual(loaded.widths, [5, 7, 3])
        self.assertEqual(loaded.activation, 'relu')
        self.assertEqual(loaded.output_activation, 'sigmoid')
        self.assertEqual(loaded.seed, 77)
        self.assertEqual(header, {'stage': 'ae', 'frame': '8x8x3'})
        x = self.rng.standard_normal((4, 5))
        self.assertBitEqual(forward(loaded, x), forward(m, x))

    def test_inspect(self):
        m = MlpModel([2, 3, 1], seed=5)
        path = os.path.join(self.tempdir(), 'm.sdgc')
        save_model(path, m)
        info = inspect_checkpoint(path)
        self.assertEqual(info['widths'], [2, 3, 1])
        self.assertEqual(info['n_params'], m.n_params())
        self.assertEqual(info['version'], 1)
        self.assertEqual(info['header'], {})

    def test_corrupt(self):
        data = dumps_model(MlpModel([2, 2]))
        self.assertRaises(FormatError, load_model_from,
                          io.BytesIO(b'XXXX' + data[4:]))
        self.assertRaises(FormatError, load_model_from,
                          io.BytesIO(data[:-3]))
        self.assertRaises(FormatError, load_model_from,
                          io.BytesIO(data + b'\x00'))
        bad_version = data[:4] + int_to_bytes(9, 4) + data[8:]
        self.assertRaises(FormatError, load_model_from,
                          io.BytesIO(bad_version))

    def test_header_encoding(self):
        self.assertRaises(FormatError, dumps_model, MlpModel([1, 1]),
                          {'a=b': 'c'})
        self.assertRaises(FormatError, dumps_model, MlpModel([1, 1]),
                          {'a': 'two\nlines'})


class TestFrameFiles(TestBase):
    def sequence(self, F=3, H=4, W=5):
        return FrameSequence(self.rng.integers(0, 256, (F, H, W, 3),
                                               dtype=np.uint8))

    def test_fsq(self):
        seq = self.sequence()
        path = os.path.join(self.tempdir(), 'x.fsq')
        write_fsq(path, seq)
        self.assertEqual(read_fsq(path), seq)
        data = dumps_fsq(seq)
        self.assertEqual(data[:4], b'FSQ1')
        self.assertEqual(len(data), 4 + 16 + 3 * 4 * 5 * 3)
        self.assertRaises(FormatError, read_fsq_from, io.BytesIO(data[:-1]))
        self.assertRaises(FormatError, read_fsq_from,
                          io.BytesIO(data + b'\x00'))
        self.assertRaises(FormatError, read_fsq_from,
                          io.BytesIO(b'FSQ0' + data[4:]))

    def test_ppm(self):
        frame = self.sequence().pixels[0]
        data = dumps_ppm(frame)
        self.assertTrue(data.startswith(b'P6\n5 4\n255\n'))
        self.assertBitEqual(loads_ppm(data), frame)
        commented = b'P6\n# made by hand\n5 4\n255\n' + data[len(b'P6\n5 4\n255\n'):]
        self.assertBitEqual(loads_ppm(commented), frame)
        self.assertRaises(FormatError, loads_ppm, b'P3\n5 4\n255\n')
        self.assertRaises(FormatError, loads_ppm, b'P6\n5 4\n65535\n')
        self.assertRaises(FormatError, loads_ppm, data[:-1])
        self.assertRaises(ShapeError, dumps_ppm, np.zeros((4, 5), np.uint8))

    def test_ppm_directory(self):
        seq = self.sequence(F=4)
        d = self.tempdir()
        paths = export_ppm_frames(seq, d, 'clip')
        self.assertEqual([os.path.basename(p) for p in paths],
                         ['clip_0000.ppm', 'clip_0001.ppm', 'clip_0002.ppm',
                          'clip_0003.ppm'])
        self.assertEqual(import_ppm_frames(paths), seq)


if __name__ == '__main__':
    unittest.main()
