"""Preparation, logical measurement and the experiment drivers."""

from .experiments import (ExperimentPlan, FaultOutcome, OutcomeDistribution, RamseyResult, apparent_flip,
                          distribution_from_leaves, measure_point, ramsey_dephasing, ramsey_period, run_bitflip,
                          run_delay_sweep, run_nth, run_ramsey, run_spam, single_fault_scan, spam_summary)
from .rb import RBResult, clifford_group, run_rb
from .rocalib import ROCalibResult, run_ro_calib
from .sampling import sample_records, sample_shots
from .schedule import (CHECK_ONLY, CHECK_PLUS_CAVITY, Fault, PrepMethod, Runner, all_single_faults,
                       fault_locations, merge_active)
