"""
Static settings for the weighted geometry verification toolkit
Registries, catalogs and report constants
"""

TOOL_NAME = "wmms-verify"

# Report schema
SCHEMA_VERSION = 1

# Exit codes
EXIT_PASS = 0
EXIT_CHECK_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERIC_FAILURE = 3

# Built-in manifold models
MODEL_NAMES = [
    "euclidean",
    "gaussian-chart",
    "sphere-spherical",
    "sphere-stereo",
    "hemisphere",
    "circle",
    "interval",
    "slab",
    "diag-family",
]

# Density and potential presets
FIELD_PRESETS = [
    "zero",
    "constant",
    "linear",
    "gaussian",
    "expr",
]

# Identity catalog, in execution order
IDENTITY_IDS = [
    "weighted-bianchi",
    "divf-gtrace",
    "divf-hessian",
    "kernel-consequence",
    "sigma-extraction",
    "log-identity",
    "expander-trace",
    "traceless-static",
    "traceless-divergence",
    "weighted-bochner",
    "tensor-divergence",
    "thm3-laplacian",
]

# Identities whose residual involves derivatives of curvature or of derived fields
FD_IDENTITY_IDS = [
    "weighted-bianchi",
    "weighted-bochner",
]

# Weighted-operator checks
WEIGHTED_CHECK_IDS = [
    "drift-forms",
    "self-adjointness",
    "trace-identity",
    "eigen-relation",
]

# Linearization checks
LINEARIZATION_CHECK_IDS = [
    "variation-oracle",
    "decomposition",
    "adjoint-duality",
]

# Boundary checks
BOUNDARY_CHECK_IDS = [
    "surface-gravity",
    "boundary-area",
    "pohozaev-schoen",
    "gauss-reduction",
    "thm1-estimate",
]

# Variation quantities for the numeric oracle
VARIATION_QUANTITIES = [
    "laplacian-f",
    "grad-norm",
    "scalar-curvature",
    "perelman-scalar",
]

# Discrete bases
BASIS_KINDS = [
    "fourier-circle",
    "interval-dirichlet",
    "sphere-harmonic-chart",
    "hermite-chart",
    "grid-fd",
]

INTERVAL_FAMILIES = ["sine", "legendre"]

# Solver tasks
SOLVER_TASKS = ["eigen", "kernel-search", "probe"]

# Nonexistence probe hypotheses
PROBE_HYPOTHESES = [
    "constant-perelman",
    "isotropic-ricci-f",
    "out-of-hypothesis",
    "control",
]

# Resolution ladders
PROBE_LADDER_1D = [32, 64, 128]
PROBE_LADDER_SPHERE = [4, 6, 8]

# Tensor presets for the tensor-divergence and Pohozaev-Schoen checks
TENSOR_PRESETS = ["metric", "ricci-f", "traceless-ricci-f", "random"]

# Vector field presets for the Pohozaev-Schoen check
VECTOR_PRESETS = ["zero", "gradient", "random"]

# Output formats
REPORT_FORMATS = ["json", "csv", "text", "pdf"]

# CSV columns
CSV_COLUMNS = ["identity_id", "sup_residual", "mean_residual", "pass"]

# Scenario file sections and their allowed keys
SCENARIO_SECTIONS = {
    "scenario": ["name", "seed", "description"],
    "model": ["name", "dim", "truncation", "cap_angle", "lower", "upper",
              "expressions", "coordinates", "pole", "radius"],
    "density": ["preset", "value", "vector", "expression", "shift"],
    "potential": ["preset", "value", "vector", "expression"],
    "checks": ["identities", "boundary", "linearization", "weighted",
               "tensor", "vector", "lambda0", "lambda1", "c0", "c1", "omega",
               "samples", "positivity_floor", "eigen_coefficient"],
    "solver": ["task", "basis", "family", "size", "count", "hypothesis",
               "ladder", "floor", "expected_kernel_dim", "expected_span"],
    "grid": ["rule", "nodes", "boundary_nodes", "sample_nodes", "convergence"],
    "tolerances": ["identity", "fd_identity", "kernel", "boundary", "duality",
                   "hypothesis", "sigma_threshold", "spectral", "oracle", "angle"],
}

# Pass marks for text output
PASS_MARK = "✅"
FAIL_MARK = "❌"
