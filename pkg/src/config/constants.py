"""
Application constants and configuration values.
Centralizes the numeric defaults, wire limits and preset tables.
"""
from enum import Enum

# ===========================================
# AUDIO / VIDEO CAPTURE
# ===========================================
SAMPLE_RATE = 16000          # Hz, mono
T_CHUNK = 0.040              # seconds per transmitted chunk (one video frame)
FRAME_WIDTH = 640            # px
FRAME_HEIGHT = 380           # px
VIDEO_FPS = 25
PCM_SCALE = 32768.0          # int16 <-> float conversion

# Mouth region of interest on the synthetic face (x, y, width, height)
DEFAULT_ROI = (280, 250, 80, 40)

# ===========================================
# SPECTRAL ANALYSIS
# ===========================================
FFT_SIZE = 512
HOP_SIZE = 256
MASK_EPSILON = 1e-12
SPECTRAL_FLOOR = 0.01                 # floor as a fraction of |Y|
OVERSUBTRACTION = 1.0                 # 1.0 is plain subtraction
NOISE_PROFILE_QUANTILE = 0.2          # quietest fraction of frames used for the blind profile
VISUAL_GAIN_FLOOR = 0.1               # gain = 0.1 + 0.9 * activity

# ===========================================
# SCENE SYNTHESIS
# ===========================================
IR_BOUNDARY_S = 0.050                 # early/late split point
IR_LENGTH_S = 0.300
EARLY_DECAY_S = 0.010
LATE_DECAY_S = 0.080
LATE_ENERGY_RATIO = 0.03              # late IR energy relative to the early IR
MIXTURE_PEAK = 0.9
SNR_TOLERANCE_DB = 0.5

# ===========================================
# PIPELINE / PLAYBACK
# ===========================================
GAP_TOLERANCE_S = 0.001               # a gap is an inter-play interval > t_chunk + 1 ms
JITTER_QUANTILE_SIGMAS = 5.0          # jitter allowance = median * exp(5 * sigma)
ACK_TIMEOUT_S = 0.5                   # only armed when the channel can lose messages
MAX_SEQ_GAP = 250                     # chunks a sequence number may run ahead of the input buffer
RTT_SAMPLES = 100

# ===========================================
# WIRE FORMAT
# ===========================================
WIRE_MAGIC = b"AVSE"
WIRE_VERSION = 1
WIRE_VERSION_CHECKSUMMED = 2         # header CRC-32 after the header, payload CRC-32 trailer
MAX_PAYLOAD_BYTES = 16 * 1024 * 1024
DEFAULT_QUALITY = 80


class MessageType(int, Enum):
    """Wire message types."""
    MEDIA_CHUNK = 1
    ENHANCED_AUDIO = 2
    CONTROL = 3


class ControlCode(int, Enum):
    """Codes carried in CONTROL payloads."""
    HELLO = 1
    ACK = 2
    END_OF_STREAM = 3
    ERROR = 4


# ===========================================
# CHANNEL PRESETS
# ===========================================
# Emulation fiction, not measurements. Chosen so that a 0.3 MB upload plus a
# short acknowledgement round-trips under 40 ms only on ethernet, 5g, wifi5
# and wifi6.
# Fields: base_one_way_ms, bandwidth_bps, jitter_ms (median), jitter_sigma
CHANNEL_PRESETS = {
    "ethernet": (1.0, 1e9, 0.05, 0.3),
    "5g":       (10.0, 150e6, 0.5, 0.4),
    "wifi4":    (5.0, 45e6, 2.0, 0.6),
    "wifi5":    (3.0, 300e6, 1.0, 0.5),
    "wifi6":    (2.0, 600e6, 0.5, 0.5),
    "4g":       (35.0, 20e6, 8.0, 0.7),
    "aws_wifi": (25.0, 40e6, 5.0, 0.6),
    "loopback": (0.0, float("inf"), 0.0, 0.0),
}

# Presets swept by the network experiments (loopback is a test fixture)
NETWORK_PRESETS = ("ethernet", "5g", "wifi4", "wifi5", "wifi6", "4g", "aws_wifi")
COHERENT_PRESETS = ("ethernet", "5g", "wifi5", "wifi6")

# ===========================================
# MODEL TIERS
# ===========================================
# name: (t_a seconds on the reference window, parameter count)
MODEL_TIERS = {
    "model_1": (1.20, 1_540_396),
    "model_2": (0.55, 603_564),
    "model_3": (0.35, 202_564),
}
MODEL_REFERENCE_WINDOW_S = 0.2
BYTES_PER_PARAMETER = 4

# ===========================================
# SWEEPS
# ===========================================
COMPRESSION_QUALITIES = (100, 95, 90, 85, 80, 75, 70, 65, 60)
CHUNK_SIZE_FRAMES = (1, 5, 25, 50, 125, 250)
SWEEP_NAMES = ("networks", "compression", "chunk_size", "coherence", "models")
