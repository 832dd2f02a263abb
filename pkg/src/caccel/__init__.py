"""2D cellular-automaton engine and constant-factor acceleration toolkit."""

from .accelerate import (AcceleratedRecognizer, build_accelerated, choose_parameters,
                         convexify_wrapper, small_input_fallback, time_bound)
from .compression import (CompressionLayer, CompressionRun, PackedCell, build_layer,
                          layer_step, multi_layer, rho, rho_inverse, run_compression)
from .engine import (Automaton, Configuration, Picture, RecognitionProfile,
                     builtin_automaton, check_permanent, check_quiescent,
                     lift_superneighborhood, picture_configuration, recognize, run, step)
from .errors import CaccelError, ParseError
from .geometry import (MOORE, VON_NEUMANN, Completeness, DirectionPlan, Neighborhood,
                       RationalPolygon, alpha_group, arrival_times, convex_hull,
                       convexify, direction_set, eta_square, is_complete, k0_min,
                       max_rectangle, minkowski_sum, power, real_time, scalar,
                       scale_to_integer, tau_sync)
from .grouping import GroupedAutomaton, build_grouped, gather_phase, grouped_step
from .sync import ActivationSchedule, SyncWrapped, progress_guarantee, sync_step, wrap

__all__ = [name for name in dir() if not name.startswith("_")]
