"""Delay-Doppler (OTFS) link-level simulation toolkit."""

__version__ = "0.1.0"

from .core import (
    Constellation,
    CPScheme,
    FrameParams,
    RngStream,
    bpsk,
    map_bits,
    qam16,
    qpsk,
    unvec,
    vec,
)
from .transforms import dft, dzt, idft, idzt, isfft, sfft, td_to_dd_matrix
from .modem import (
    TimeDomainFrame,
    WindowSpec,
    add_cp,
    demodulate,
    demodulate_dzt,
    demodulate_sfft,
    modulate_dzt,
    modulate_sfft,
    remove_cp,
)
from .channel import (
    ChannelRealization,
    EffectiveChannel,
    PathSpec,
    PowerDelayProfile,
    apply_td,
    build_effective_dd,
    build_effective_ofdm,
    build_effective_td,
    sample_channel,
)
from .pulse import (
    SampledPulse,
    cross_ambiguity,
    effective_dd_gain,
    is_ideal_pulse,
    pulse_sparsity_metric,
    rectangular_pulse,
)
from .estimation import PilotConfig, embed_pilot, estimate_channel, nmse
from .detection import (
    DetectionResult,
    FactorGraph,
    detect_cdid,
    detect_ml,
    detect_mmse,
    detect_mpa,
)
from .coding import (
    ConvCode,
    achievable_rate,
    conv_encode,
    diversity_slope,
    pep_bound,
    viterbi_decode,
)
