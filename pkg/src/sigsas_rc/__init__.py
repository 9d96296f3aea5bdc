"""Signature state-affine reservoirs, their JL reductions and Volterra readouts."""

from .jl import JlMap, check_distances, min_dimension, sample_jl, sample_passing_jl
from .random_sas import RandomSasReservoir, build_direct, reduce_from_jl, run_reduced, step_reduced
from .readout import Readout, fit_readout, transport_readout
from .sigsas import SigSasConfig, closed_form, monomial_matrix, run, step
from .tensor import TensorShape, TensorState
from .volterra import TargetFilter, VolterraKernelSet, exponential_filter, readout_from_kernels

__version__ = "0.1.0"
