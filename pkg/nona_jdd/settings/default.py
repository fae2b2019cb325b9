from nona_jdd.plugins import FiniteOutputPlugin, ForwardTimingPlugin

# Plugins to be attached to network methods.
# The upper most plugin is the "outer most" executed.
PLUGINS = (
    FiniteOutputPlugin,
    ForwardTimingPlugin,
)


# logging.DEBUG     # 10
# logging.INFO      # 20
# logging.WARNING   # 30
# https://docs.python.org/3/howto/logging.html
LOG_LEVEL = 30


# numeric precision: model runs vs finite-difference checks
DEFAULT_DTYPE = "float32"
GRADCHECK_DTYPE = "float64"

# every op output is scanned for NaN/Inf when set
CHECK_FINITE = True

LEAKY_RELU_SLOPE = 0.2
BATCH_NORM_EPS = 1e-5
BATCH_NORM_MOMENTUM = 0.1

# losses
LOG_CLAMP_EPS = 1e-7
LAMBDA_G = 1e-4

# metrics
PSNR_CAP_DB = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

# optimizer
ADAM_LR = 5e-4
ADAM_BETAS = (0.9, 0.99)
ADAM_EPS = 1e-8

# data pipeline
PREFETCH_BATCHES = 2
PATCH_READ_WORKERS = 4

# published reference figures, reported next to our own measurements
PUBLISHED_PARAMETER_COUNT = 29_448_766
PUBLISHED_SECONDS_PER_1024 = 0.80
