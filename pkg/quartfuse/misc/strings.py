"""User-facing strings for the CLI."""

QUARTFUSE_CLI_DESCRIPTION   = "Query-conditioned cross-modal token gating: synthetic data, three-stage training and evaluation"
CLI_VERBOSE_HELP            = "Increase log verbosity (-v info, -vv debug)"
CLI_THREADS_HELP            = "Worker threads for generation, perturbation and evaluation (default: machine parallelism)"

CLI_SUBCOMMAND_GEN_DATA_HELP  = "Generate a synthetic multimodal dataset"
CLI_SUBCOMMAND_TRAIN_HELP     = "Run one or all training stages"
CLI_SUBCOMMAND_EVAL_HELP      = "Evaluate a checkpoint and write an EvalReport JSON"
CLI_SUBCOMMAND_ABLATE_HELP    = "Run an ablation grid from a shared stage-I checkpoint and write a CSV"
CLI_SUBCOMMAND_PERTURB_HELP   = "Apply cross-modal mismatch perturbations to a dataset"
CLI_SUBCOMMAND_GRADCHECK_HELP = "Finite-difference check of the full training objective"

CLI_CONFIG_HELP     = "JSON config file (flat key/value object)"
CLI_SET_HELP        = "Override a config key, KEY=VALUE (repeatable)"
CLI_OUT_HELP        = "Output directory"
CLI_SEED_HELP       = "Master seed (overrides the config)"
CLI_N_HELP          = "Number of samples"
CLI_STAGE_HELP      = "Stage to run: 1, 2, 3 or all"
CLI_RESUME_HELP     = "Checkpoint to resume from"
CLI_DATA_HELP       = "Dataset directory"
CLI_CHECKPOINT_HELP = "Checkpoint file"
CLI_PERTURB_HELP    = "Perturb the evaluation data with the configured mismatch spec"
CLI_REPORT_HELP     = "Where to write the EvalReport JSON"
CLI_GRID_HELP       = "Grid preset (lambda, conditioning, context-mode, lora-rank) or a JSON file with a list of config deltas"
CLI_SPEC_HELP       = "JSON file with perturbation spec keys (overrides the config)"
CLI_EPS_HELP        = "Finite-difference step"
CLI_MASKS_HELP      = "Also report modality-contribution subsets (V, AV, AVS)"
CLI_COLD_START_HELP = "Allow stage 2 or 3 without a checkpoint of the previous stage"
CLI_MODE_HELP       = "Conditioning the decoder sees: gated (fused row) or raw (all token rows)"
CLI_STAGE1_HELP     = "Shared stage-I checkpoint (trained once from the config when omitted)"
CLI_EVAL_DATA_HELP  = "Evaluation dataset directory"
CLI_ENTRIES_HELP    = "Coordinates checked per tensor (all when omitted)"

GEN_DATA_DONE   = "Wrote {n} samples to {path}"
TRAIN_DONE      = "Stage {stage} finished at step {step}: loss {loss:.4f}"
EVAL_DONE       = "Accuracy {accuracy:.3f}, relevance hit rate {hit_rate}"
ABLATE_DONE     = "Wrote {rows} ablation rows to {path}"
PERTURB_DONE    = "Perturbed {n} samples ({changed} with at least one changed modality) into {path}"
GRADCHECK_DONE  = "Max relative error {error:.3e} (tolerance {tolerance:.0e})"
