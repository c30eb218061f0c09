"""Streaming EEG source localization: LCMV beamforming with a sliding-window
covariance, recursive rank-one inverse updates and closed-form 3x3
orientation search."""
from .beamformer import (LeadField, Orientation, SourceEstimate, aori_orientation, gram3,
                         lcmv_weights, rank_sources, reconstruct, scalar_leadfield, scan_grid)
from .covstream import (CovarianceState, EegWindow, batch_covariance, covariance, init_state,
                        slide)
from .eig3 import EigenSystem3, Sym3, eigh_sym3, eigvals_sym3, eigvec_sym3, smallest_eigvec
from .millerinv import (RankOneTerm, apply_sum, direct_inverse, miller_step, rank_one_terms,
                        recursive_inverse_slide)

__version__ = "0.1.0"
