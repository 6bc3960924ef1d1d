"""uwblink: link-level simulator for high-rate UWB WPAN receivers."""

from .ber import (
    BerCurve,
    BerPoint,
    ReceiverChain,
    ReceiverConfig,
    SeriesParams,
    chernoff_ber,
    ensemble_ber,
    monte_carlo_ber,
    series_ber,
    snr_at_ber,
)
from .channel import (
    CM3,
    CM4,
    ChannelRealization,
    CompositeChannelDense,
    SvParams,
    coherence_bandwidth,
    composite_response,
    dump_realization,
    generate_realization,
    load_realization,
    load_sv_params,
    rms_delay_spread,
)
from .equalizer import (
    EqualizerDesign,
    OverallResponse,
    detect,
    identity_design,
    lms_train,
    mmse_dfe_design,
    mmse_le_design,
    overall_response,
)
from .pulse import (
    PulseSpec,
    SampledWaveform,
    gaussian_doublet,
    matched_autocorrelation,
    render_pulse,
)
from .txrx import (
    CompositeChannel,
    FrameSpec,
    RakePlan,
    composite_coefficients,
    generate_frame,
    matched_filter_output,
    rake_combine,
    rake_noise_scale,
    select_fingers,
)

__version__ = "0.1.0"
