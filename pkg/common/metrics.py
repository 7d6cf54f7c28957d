from prometheus_client import CollectorRegistry, Counter, Histogram, Info

REGISTRY = CollectorRegistry()

# Experiment runs
EXPERIMENT_RUNS = Counter(
    "experiment_runs_total",
    "Total number of experiment runs",
    ["experiment", "outcome"],
    registry=REGISTRY,
)

# Experiment wall time
EXPERIMENT_DURATION = Histogram(
    "experiment_duration_seconds",
    "Experiment wall time in seconds",
    ["experiment"],
    buckets=(0.1, 0.5, 1.0, 5.0, 10.0, 30.0, 60.0, 300.0, 900.0),
    registry=REGISTRY,
)

# Stage latency within an experiment
STAGE_LATENCY = Histogram(
    "stage_latency_seconds",
    "Latency of a single experiment stage in seconds",
    ["experiment", "stage"],
    buckets=(0.001, 0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 30.0, 120.0),
    registry=REGISTRY,
)

# Acceptance checks
CHECK_RESULTS = Counter(
    "check_results_total",
    "Acceptance check outcomes",
    ["experiment", "check", "outcome"],
    registry=REGISTRY,
)

# Error counter
ERROR_COUNT = Counter(
    "error_total",
    "Total number of errors",
    ["experiment", "error_type"],
    registry=REGISTRY,
)

# Quadrature sizes
QUADRATURE_NODES = Histogram(
    "quadrature_nodes",
    "Number of nodes used by singular quadratures",
    ["operation"],
    buckets=(64, 128, 256, 512, 1024, 2048, 4096),
    registry=REGISTRY,
)

# Lab info
LAB_INFO = Info("lab", "Lab build information", registry=REGISTRY)
