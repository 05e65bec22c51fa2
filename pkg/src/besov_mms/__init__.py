"""Besov trace and extension operators on finite metric measure spaces."""

from .core import (Ball, BesovParams, DomainWithBoundary, EmptyBall, EmptyInterior,
                   FiniteMetricMeasureSpace, MetricError, average_over_ball, ball_measure,
                   ball_members, codimension_profile, doubling_constant_estimate,
                   hausdorff_codim_content, load_space, space_from_json, space_to_json)
from .nets import (WhitneyCover, dyadic_level, maximal_separated_net, overlap_count,
                   verify_whitney, whitney_cover)
from .partition import PartitionOfUnity, UncoveredPoint, bump, partition_evaluate, verify_partition
from .besov import (besov_energy_dyadic, besov_energy_integral, energy_curve, envelope_bracket,
                    inhomogeneous_norm, scale_energy, sum_form_lp_check, sum_rearrangement_check)
from .trace import (ParameterWindowError, ScaleTooFine, cutoff_extension, fractional_maximal,
                    operator_norm_report, roundtrip_check, trace, trace_at_scale, weak11_check,
                    whitney_extension)
from .chains import (DisconnectedShell, PathTooSparse, boundary_chain, harnack_chain,
                     proximity_graph, verify_chain)
from .hyperfill import (Disconnected, FillingParams, HyperbolicFilling, boundary_embed,
                        build_filling, composed_trace, d_epsilon, mu_beta_ball, subdivide,
                        uniformized_edge_length, verify_filling)

__version__ = "0.1.0"
