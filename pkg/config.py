# config.py

import os

# Numerical defaults shared by the solver, calibration and analysis modules
SNR_CAP_DB = 300.0
RHO_SUBSET_BUDGET = 200_000
CALIBRATION_SAMPLES = 100_000
CALIBRATION_BLOCK = 1024
ENVELOPE_SLACK = 0.15

ADMM_THETA0 = 1.0
ADMM_MU = 10.0
ADMM_TAU = 2.0
ADMM_MAX_OUTER = 5000
ADMM_TOL_ABS = 1e-6
ADMM_TOL_REL = 1e-5

INNER_MAX_ITER = 500
INNER_TOL = 1e-8
POWER_ITERATIONS = 50
LIPSCHITZ_INFLATION = 1.01

CONSENSUS_ADAPT_ITERATIONS = 100
STALL_WINDOW = 500
STALL_WINDOW_FRACTION = 0.2
STALL_DECREASE = 0.01

SATURATION_BISECTION_ITERS = 30
SATURATION_RATIO_RTOL = 0.10

DEFAULT_SETTINGS = {
    'SQLALCHEMY_DATABASE_URI': 'sqlite:///' + os.path.join(os.getcwd(), 'qcs_runs.db'),
    'SQLALCHEMY_TRACK_MODIFICATIONS': False,
    'RESULTS_DIR': 'results',
    'SWEEP_THREADS': 1,
    'CALIBRATION_SAMPLES': CALIBRATION_SAMPLES,
    'RHO_SUBSET_BUDGET': RHO_SUBSET_BUDGET,
    'LOG_LEVEL': 'INFO',
}
