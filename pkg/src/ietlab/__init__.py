"""Numerical laboratory for interval exchange transformations."""

from .errors import (AsymmetricCoefficients, AtSingularity, ConeViolation, DegenerateProduct, DegenerateShrink,
                     DepthExceeded, EndpointHit, IETLabError, InsufficientTail, NoDominantTower, NonComposablePath,
                     NonPositiveLength, NonPositiveRoof, ReduciblePermutation, ReturnTimeExceeded,
                     SearchBudgetExceeded, StepBudgetExceeded, UndefinedStep, ValidationError, ZeroColumn)
from .iet import (IET, InducedMap, Permutation, TowerDescriptor, apply_orbit, induce_first_return, iterate,
                  keane_depth_check, make_iet, random_iet, rotation, towers_disjoint)
from .rauzy import (RauzyGraph, RauzyTrace, balance_ratio, cylinder_measure, induction_trace, kerkhoff_extend,
                    lyapunov_estimate, markov_cylinder_check, natural_extension_step, rauzy_class_enumerate, rv_step)
from .roof import (FlowPoint, SymLogRoof, birkhoff_sum, closest_visits, crossing_counts, crossing_deviation,
                   flow_evaluate, flow_many, kochergin_sum_bound, make_roof, random_symlog_roof,
                   rescale_to_mean_one, rotation_g_sum, trimmed_birkhoff_sum, trimming_terms)
from .towers import TowerSums
from .rigidity import (CoexistenceRecord, ResonanceCertificate, RigidityCertificate, RothReport, almost_cylinder,
                       coexistence_search, detect_rigid_towers, fit_trimmed_bound, resonant_times,
                       rigidity_times_in_window, roth_distortion_report, verify_certificate)
from .renorm import RenormalizedFlow
from .diagnostics import (CenteredSampleSet, RectSet, ShearingReport, TailReport, centered_tail_analysis,
                          correlation_estimate, fit_exponential_tail, resonant_mixing_scan, shearing_report,
                          tightness_report)

__version__ = "0.1.0"
