##############################################################################
# Copyright (c) 2026 sdgsc developers
# All rights reserved.
# Licensed under the New BSD License
# (http://www.freebsd.org/copyright/freebsd-license.html)
#
# Goal-oriented semantic video communication laboratory.
##############################################################################

CHECKPOINT_MAGIC = b'SDGC'
CHECKPOINT_VERSION = 1
FSQ_MAGIC = b'FSQ1'

# bits per transmitted SI element (float32 on the air)
SI_ELEMENT_BITS = 32

PIXEL_MAX = 255.0
FRAME_CHANNELS = 3

ACTIVATIONS = ('identity', 'relu', 'tanh', 'sigmoid')

CHANNEL_KINDS = ('awgn', 'rayleigh', 'nakagami')
GAIN_POLICIES = ('block', 'per_keyframe')
NAKAGAMI_MIN_M = 0.5

PRIORITY_KINDS = ('sparse', 'cosine')
SPRITE_KINDS = ('square', 'disc')
DENOISER_KINDS = ('sd', 'msd', 'psd', 'none', 'mmse-only')
BRANCHES = ('eps_z', 'eps_h')

DIVERGENCE_LOSS = 1e6

# lower bound on a gain estimate, as a fraction of the prior rms gain
GAIN_FLOOR = 0.05

# desk scope
MAX_FRAMES = 64
MAX_FRAME_EXTENT = 128
MAX_LATENT_DIM = 4096

# exit codes
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_DIVERGENCE = 4
