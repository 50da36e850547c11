"""Evaluation reports and the ablation protocols built on them."""
from .report import EvalReport, SampleResult, summarize
from .evaluate import evaluate, evaluate_oracle, evaluate_sample
from .ablation import GRIDS, AblationRun, ablation_matrix, load_grid, modality_contribution, parse_mask, shared_stage1, write_table
