"""Dynamic random dot product graph embedding with a Gibbs posterior.

Latent trajectories get random-walk priors and are sampled with a banded
Cholesky Gibbs sampler; forecasts propagate each posterior draw forward.
"""
__version__ = '0.1.0'

from .network import (DynamicNetwork, EdgeListError, load_edge_list,
                      write_edge_list, density, degree_counts)
from .banded import (BandedMatrix, BandedCholesky, NotPositiveDefiniteError,
                     cholesky_banded, solve_banded)
from .prior import RwPriorSpec, difference_matrix, prior_precision_blocks
from .spectral import (Embedding, ase, ase_per_time, omni, uase, mase,
                       procrustes, sequential_align)
from .sampler import (LatentState, SamplerConfig, PosteriorDraws, run_chain,
                      gibbs_sweep, init_state)
from .forecast import Forecast, forecast_expectation, propagate
from .simulate import SimulationSpec, simulate
from .metrics import (MetricReport, rmse_latent, rmse_forecast, auc, aupr,
                      degree_gof)
