"""Shared physical and convention constants."""

SPEED_OF_SOUND = 343.0  # m/s at 20 C

# IR segmentation conventions
DIRECT_WINDOW_S = 0.0025  # direct-path window after the direct arrival
EARLY_WINDOW_S = 0.050  # early/late boundary after the direct arrival

EDC_FLOOR_DB = -120.0

DEFAULT_MIC_RADIUS = 0.035  # m, 7 cm diameter circular array
DEFAULT_N_MICS = 6
