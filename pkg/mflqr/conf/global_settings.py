"""Default MFLQR settings.

Override these with settings in the module pointed-to by the
``MFLQR_SETTINGS_MODULE`` environment variable or by using
``settings.configure(**settings)`` or ``settings.load('path.to.settings')``

"""

# **EXPERIMENTS**

#: Risk parameters swept when a config omits ``lambda_grid``.
DEFAULT_LAMBDA_GRID = (0.0, 1e-3, 1e-2, 1e-1, 1.0)

#: Lower and upper empirical quantiles of the ensemble bands.
QUANTILES = (0.05, 0.95)

#: Seed used when neither the config nor ``--seed`` provides one.
DEFAULT_SEED = 20240101

#: Seed of the fixed normal draws of the initial states.
INITIAL_STATE_SEED = 7

#: Ensemble size used when the config omits ``n_runs``.
DEFAULT_N_RUNS = 500

#: Rollouts simulated together as one vectorized batch.
ROLLOUT_CHUNK = 256

# **NUMERICS**

#: Absolute tolerance on the sum of disturbance probabilities.
PROBABILITY_SUM_ATOL = 1e-12

#: Tolerance on symmetry and smallest eigenvalue of problem data.
PSD_ATOL = 1e-10

#: Smallest eigenvalue tolerated for Riccati iterates.
SCHEDULE_PSD_ATOL = 1e-9

#: Condition number above which a pseudo-block factor is treated as singular.
SINGULAR_CONDITION = 1e12

#: Largest nk for which dense centralized matrices are built.
DENSE_ORACLE_MAX_DIM = 64

# **VERIFICATION**

#: Relative tolerance of the centralized vs mean-field schedule comparison.
EQUIVALENCE_RTOL = 1e-8

#: Absolute tolerance of the pseudo-block algebra identities.
ALGEBRA_ATOL = 1e-10

#: Absolute tolerance of inverse round trips.
INVERSE_ATOL = 1e-8

#: Limit on |z| for Monte Carlo identities.
Z_SCORE_LIMIT = 4.0

#: Fewest rollouts accepted by the predictive variance estimator.
MIN_VARIANCE_SAMPLES = 10_000

#: Rollouts used by the predictive variance check of ``mflqr verify``.
VERIFY_VARIANCE_SAMPLES = 100_000

#: Rollouts used by the constant offset check of ``mflqr verify``.
VERIFY_OFFSET_SAMPLES = 10_000

#: Time steps checked by the predictive variance check (``t = 1..N``).
VERIFY_VARIANCE_STEPS = 10

# **OUTPUT**

#: printf style format of floats in CSV outputs (round trips float64).
CSV_FLOAT_FORMAT = "%.17g"

#: Version of the CSV column schemas.
FORMAT_VERSION = "1"
