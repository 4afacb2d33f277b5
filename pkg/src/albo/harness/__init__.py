from .experiment import AggregateResult, ConfigError, ExperimentConfig, aggregate, run_experiment
