"""rirkit: room impulse response simulation, analysis, and speech augmentation.

Two RIR engines share one scene model: an image-source engine (specular
reflections, lattice fast path for box rooms, validated image paths for
generic planar scenes) and a stochastic ray tracer ("gas") that models
occlusion plus specular and diffuse reflections. Around them sit scenario
sampling, Schroeder decay analysis, and a convolution/noise-mixing
augmentation pipeline, all seeded and bit-reproducible.
"""

__version__ = "0.1.0"

from .analysis import (
    EnergyDecayCurve,
    ImpulseResponse,
    IrMetadata,
    Segmentation,
    direct_to_reverberant_ratio,
    energy_split,
    estimate_t60,
    schroeder_edc,
    segment_ir,
)
from .augment import AudioBuffer, AugmentSpec, augment_corpus, convolve, mix_noise
from .errors import (
    DegenerateGeometryError,
    InfiniteT60Error,
    InsufficientDecayError,
    IrTooShortError,
    MetadataRequiredError,
    RateMismatchError,
    RirkitError,
    SamplingFailedError,
    SilentIrError,
    SilentSignalError,
    UnreachableT60Error,
)
from .geometry import (
    Hit,
    Ray,
    Scene,
    Wall,
    circular_array,
    intersect,
    make_scene_from_walls,
    make_shoebox,
    reflect_specular,
    sample_lambert,
    vec3,
)
from .image_source import (
    ImageSource,
    enumerate_images_generic,
    enumerate_images_shoebox,
    image_count,
    render_ir_image,
    validate_image_path,
)
from .io import read_audio, read_ir, write_audio, write_ir
from .materials import Material, min_achievable_t60, predicted_t60, sabine_absorption
from .sampler import RoomConfig, generate_dataset, sample_config
from .simulate import ImageParams, simulate_rir
from .tracer import EnergyHistogram, TraceParams, histogram_to_ir, trace

__all__ = [name for name in dir() if not name.startswith("_")]
