"""
Configuration for the Heavy Ball lab.
This module centralizes constants and settings used throughout the application.
"""
import logging

# --------- Logging Configuration ---------
LOG_FILE = None  # set a path to also log to a file
LOG_LEVEL = logging.INFO
QUIET_LOG_LEVEL = logging.WARNING
LOG_FORMAT = '%(asctime)s - %(levelname)s - %(name)s - %(message)s'

# --------- Recurrence Configuration ---------
# Equal roots are declared when |a1^2 + 4 a2| <= DISC_TOLERANCE * max(1, a1^2, |a2|)
DISC_TOLERANCE = 1e-10

# Stability verdicts from the roots and from the Jury inequalities may only
# disagree inside this band around the unit circle
JURY_TOLERANCE = 1e-9

# Powers up to this exponent use repeated multiplication, exp/log above
POWER_MULTIPLY_LIMIT = 64

# Discrete peak scan: K_scan = max(PEAK_SCAN_MIN, ceil(PEAK_SCAN_FACTOR / (1 - rho)))
PEAK_SCAN_MIN = 100
PEAK_SCAN_FACTOR = 10.0

# --------- Objective Configuration ---------
# Central difference step is FD_STEP_SCALE * max(1, ||x||_inf)
FD_STEP_SCALE = 1e-5

# Grid points whose gap f(x) - f* is below this are skipped when certifying PL
PL_GAP_FLOOR = 1e-12

# Certification grid for the nonconvex PL test function
PL_GRID_LO = -20.0
PL_GRID_HI = 20.0
PL_GRID_POINTS = 100_000

# --------- Heavy Ball Configuration ---------
DIVERGENCE_NORM = 1e12
DEFAULT_GRAD_TOL = 1e-9

# Modal closed form switches to the equal-roots form within this fraction of (L - mu)
MODAL_BOUNDARY_FRACTION = 1e-8

# --------- Lyapunov Configuration ---------
# V_k <= V_{k-1} + MONOTONE_TOLERANCE * max(1, V_0)
MONOTONE_TOLERANCE = 1e-10
RATE_TOLERANCE = 1e-8

# Fixed-step integrator limit: dt_max = min(DT_FRICTION / a, DT_GAIN / sqrt(b L))
DT_FRICTION = 0.1
DT_GAIN = 0.5

# --------- Adaptive Algorithm Configuration ---------
ALPHA_FRACTION = 0.5   # alpha = ALPHA_FRACTION / L_estimate
BETA_FRACTION = 0.9    # beta = BETA_FRACTION * sqrt(1 - alpha L_estimate)
DEFAULT_EPS = 1e-12
MAX_DOUBLINGS = 60
ACCEPT_SLACK = 1e-12   # relative slack of the Lyapunov acceptance test
DEFAULT_MAX_ITERS = 10_000

# Policy comparison: iterations until f - f* <= COMPARE_TOL
COMPARE_TOL = 1e-8
# Row name of the adaptive method when a comparison starts from an L estimate
ADAPTIVE_ROW = "adaptive"

# Maximum number of worker threads for parallel policy runs
MAX_WORKERS = 5

# --------- Harness Configuration ---------
OUTPUT_FIELDS = ("k", "x_norm", "f", "V", "grad_norm", "event", "alpha", "beta", "L_estimate")
DEFAULT_OUTPUT_FIELDS = ("k", "x_norm", "f", "V", "event")
SUMMARY_FIELDS = ("policy", "iterations_to_tol", "restarts", "final_f", "status")
# Single coordinates may be requested as x1 ... xn (1-based)
COORDINATE_FIELD_PATTERN = r"^x([1-9][0-9]*)$"
CSV_PRECISION = 17
DEFAULT_PEAK_STEPS = 40
DEFAULT_SEED = 0
DEFAULT_POLICY = "none"
COMMANDS = ("peak", "run", "adaptive", "compare")

PROBLEM_KINDS = ("diagonal-quadratic", "nonconvex-pl")
PARAM_RULES = ("explicit", "optimal", "theorem2-feasible", "theorem3-feasible")
NAMED_INITS = ("worst-case-e1", "worst-case-en", "zeros-ones", "ones-ones")
SPECTRUM_RULES = ("log-uniform", "geometric")

# Process exit codes
EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_UNSTABLE = 2
EXIT_BUDGET_EXHAUSTED = 3
EXIT_DIVERGED = 4
EXIT_SELFTEST_FAILED = 5

# --------- Selftest Configuration ---------
# Checked-in experiment recipes executed by `selftest`
RECIPES_DIR = "recipes"
SELFTEST_SEED = 2024
PEAK_MATCH_TOLERANCE = 1e-12
ETA_RATIO_BAND = (0.95, 1.05)
MODAL_MATCH_TOLERANCE = 1e-9
CLOSED_FORM_DRAWS = 100
MONOTONE_TRIALS = 1000
RATE_TRIALS = 60
MIN_SIGN_CHANGES = 10
ENERGY_SUP_SLACK = 1e-6
