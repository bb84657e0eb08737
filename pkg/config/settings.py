"""
Application configuration settings
"""
from pathlib import Path

# Project paths
RECIPES_DIR = Path(__file__).parent / "recipes"

# Audio settings
SAMPLE_RATE = 16000  # Hz
FFT_SIZE = 512  # 257 bins
HOP_SIZE = 256  # 16 ms at 16 kHz
WINDOW = 'sqrt_hann'

# Graph engine
DEFAULT_PRECISION = 'float32'
LAYER_NORM_EPS = 1e-5
GRAD_CHECK_EPS = 1e-5

# Model defaults
MODEL_DEFAULTS = {
    'num_blocks': 3,
    'feature_dim': 257,  # N
    'embed_dim': 128,  # E
    'num_heads': 8,  # D
    'hidden_size': 512,  # H, cells per direction
    'num_sources': 2,
}
SINGLE_CHANNEL_LAYERS = 4
RELATIONAL_EPS = 1e-8
FORGET_BIAS_INIT = 1.0

# Training defaults
DEFAULT_LEARNING_RATE = 1e-3
DEFAULT_BATCH_SIZE = 4
DEFAULT_MAX_EPOCHS = 100
PLATEAU_PATIENCE = 3  # epochs
LR_DECAY_FACTOR = 0.5
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
GRAD_CLIP_NORM = 5.0
SISNR_EPS = 1e-8  # relative to target energy

# Room simulation
SPEED_OF_SOUND = 343.0  # m/s
NUM_CANDIDATE_POINTS = 10
DEFAULT_NUM_CHANNELS = 7
FRACTIONAL_DELAY_TAPS = 8
MAX_ORDER_TRAIN = 10
WALL_MARGIN = 0.1  # meters kept between any point and a wall
SIMULATION_RANGES = {
    'room_x': (4.0, 10.0),
    'room_y': (3.0, 8.0),
    'room_z': (2.5, 4.0),
    'table_x': (1.0, 3.0),
    'table_y': (0.8, 2.0),
    'table_height': 0.75,
    'mic_height': (0.75, 0.9),
    'source_ring': (0.3, 1.5),
    'source_height': (1.0, 1.3),
    'beta': (0.2, 0.8),
    'snr_db': (13.0, 17.0),
    'overlap_ratio': (0.0, 1.0),
}
UTTERANCE_SECONDS = 2.0
RIR_SECONDS = 0.25
PEAK_LEVEL = 0.9  # mixtures above this peak are rescaled

# Enhancement
DIAGONAL_LOADING = 1e-6
TRACE_FLOOR = 1e-10
VAD_RAMP_SECONDS = 0.010
ENERGY_VAD_THRESHOLD_DBFS = -40.0
ENERGY_VAD_HANGOVER_SECONDS = 0.050
ENERGY_VAD_FRAME_SECONDS = 0.010

# CLI exit codes
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3
