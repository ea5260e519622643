"""Double-chirp preamble design and ML multiuser preamble detection for LoRa."""
from .css import (BinSpectrum, ChirpTable, build_chirp_table, dechirp, demod_bins,
                  square_law_combine)
from .errors import CapacityError, ConfigurationError, DimensionError, DoubleChirpError
from .preamble import (AssignmentPlan, PreambleAssignment, assign_preambles,
                       build_preamble_symbol, delta_of, validate_assignment)
from .sliding_dft import SlidingDft
from .detector import (DetectionEvent, DetectorParams, bcp, decide, log_likelihood_noise,
                       log_likelihood_preamble, log_likelihood_resembled, make_params,
                       run_detection, bcp_series)

__version__ = "0.1.0"
