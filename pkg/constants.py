import math

# Max-entropy prior
LAMBDA_STAR = 10.0
BETA_EFF = 10.0
REFERENCE_SAMPLES = 4096
REFERENCE_CHUNK = 512
DUAL_ITERATIONS = 2000
DUAL_STEP_SIZE = 0.05
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8
LOG_UNDERFLOW = math.log(1e-300)
QTABLE_REFERENCE_STD = 0.5

# SGLD
SGLD_STEPS = 200
SGLD_STEP_SIZE_BANDIT = 1e-3
SGLD_STEP_SIZE_MDP = 5e-4
SGLD_TEMPERATURE = 1.0

# Environments
BETA_PARAM_LOW = 0.05
BETA_PARAM_HIGH = 4.0
DEEP_SEA_GOALS = ("corner", "right-quarter", "right-half", "uniform")
TIE_TOLERANCE = 1e-12

# Agents
UCB_CONSTANT = math.sqrt(2.0)
ENSEMBLE_SIZE = 8
BOOTSTRAP_MASK_RATE = 0.8
DQN_LEARNING_RATE = 0.05
DQN_GRADIENT_STEPS = 32
NAIVE_QTABLE_STD = 0.1

# Harness
ENTROPY_THRESHOLDS = (0.8, 1.6)
ENTROPY_MC_SAMPLES = 20000
RECORD_COLUMNS = (
    "algo",
    "task_dist_id",
    "task_id",
    "seed",
    "episode",
    "reward",
    "instant_regret",
)
SUMMARY_COLUMNS = ("algo", "group", "episode", "mean_cum_regret", "stderr")
DEFAULT_OUTPUT_DIR = "results"
VERSION = "0.1.0"
