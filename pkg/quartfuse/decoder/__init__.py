"""The conditioned decoder: forward pass, adapters, losses and decoding."""
from .model import DecoderConfig, DecoderLayer, DecoderParams, causal_mask, decode_logits, init_decoder
from .lora import LoraAdapter, LoraAdapters, init_lora, lora_merge, merge_adapters
from .losses import REG_SIGNS, loss_quart, loss_reg, loss_total
from .decode import greedy_decode
