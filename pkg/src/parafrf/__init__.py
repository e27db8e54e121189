"""parafrf: load-parametric FRF identification and input-force reconstruction."""
__version__ = "0.1.0"

from .errors import (AmbiguousNullspaceWarning, DegenerateExcitationError,  # noqa: E402
                     DegenerateReferenceError, DivisionSingularityError, EigenConditionError,
                     InvalidArgumentError, NumericalInconsistencyError, OrderExhaustedError,
                     OutOfRangeError, ParafrfError, PoleCollisionError, RankDeficiencyError)
from .signals import (Spectrum, TimeSeries, WaveShape, fft_spectrum, gen_chirp,  # noqa: E402
                      gen_periodic, ifft_real, read_timeseries_csv, write_timeseries_csv)
from .frf import (FrfDataset, LoadParameter, band_rms, decimate, gaussian_smooth,  # noqa: E402
                  h1_estimate, read_dataset, smooth_dataset, write_dataset)
from .vecfit import (BarycentricModel1D, FitDiagnostics, PoleResidueModel, VfOptions,  # noqa: E402
                     pr_evaluate, relocate_poles, vf_fit)
from .paaa import (PaaaDiagnostics, ParametricBarycentricModel, greedy_select,  # noqa: E402
                   paaa_evaluate, paaa_fit, slice_at_param, solve_weights)
from .inversion import (CrossValMatrix, InversionOptions, ModelEntry, TestRecord,  # noqa: E402
                        cross_validate, invert_force, relative_l2)
from .plant import (ModalParams, ParametricPlant, default_boom_plant,  # noqa: E402
                    default_load_levels, plant_frf, simulate_response)
from .config import RunConfig, load_config  # noqa: E402
