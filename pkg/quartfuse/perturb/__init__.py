"""Stream perturbations and the cross-modal mismatch generator."""
from .ops import (AddJitter, AddNoise, FrameDropout, FrameJitter, NoPerturbation, OpContext, PerturbationOp, ReplaceWithIrrelevant,
                  Reverse, add_jitter, add_noise, frame_dropout, frame_jitter, replace_with_irrelevant, reverse)
from .mismatch import PERTURB_ORDER, DEFAULT_OPS, PerturbationRecord, PerturbationSpec, generate_mismatch, perturb_dataset, sample_seed
