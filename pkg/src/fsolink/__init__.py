"""Desk-scale free-space optical link simulator.

Gamma-gamma turbulence fading, IM/DD and dual-pol coherent transmission
chains, a traditional digital image pipeline (transform codec + rate-3/4
LDPC + OOK/PAM4/QPSK/16QAM) and a linear discrete-time analog mapper, with
harness experiments that reproduce the cliff effect, the leveling effect and
the analog path's graceful degradation.
"""

from .analog import AnalogMapping, PaprReport, analog_decode, analog_encode, papr
from .bits import BitBuffer
from .codec import CorruptStreamError, RateInfeasibleError, source_decode, source_encode
from .core import (
    ImageTensor,
    Layout,
    LinkConfig,
    RunReport,
    SymbolStream,
    normalize_power,
    read_ppm,
    read_symbol_file,
    seeded_rng,
    write_ppm,
    write_symbol_file,
)
from .digital import ModFormat, demodulate_llr, modulate, td_receive_image, td_transmit_image
from .dsp import FilterTaps, cpr_pilot, ffe_equalize, matched_filter, mimo_equalize, pulse_shape, resample, srrc_taps
from .harness import (
    SweepSpec,
    calibrate_imdd_noise,
    default_coherent_config,
    default_imdd_config,
    rop_sweep,
    run_coherent,
    run_imdd,
    turbulence_run,
)
from .ldpc import LdpcCode, ldpc_decode, ldpc_encode, make_code
from .metrics import QualityScore, ber, image_rate, ms_ssim, ms_ssim_db, psnr
from .turbulence import (
    ChannelRealization,
    GammaGammaParams,
    gg_params,
    gg_pdf,
    link_budget,
    rop_timeseries,
    rytov_variance,
    sample_fading,
    scintillation_index,
)

__version__ = "0.1.0"
