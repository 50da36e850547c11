"""Query-conditioned relevance scoring and fusion of the unified token matrix."""
from .params import POOLINGS, QuartConfig, QuartParams, init_quart, zero_relevance_head
from .gating import (MODES, AttentionOutput, FusedContext, QuartOutput, RelevanceScores,
                     alpha_entropy, attend, forward, fuse, modality_mass, relevance)
