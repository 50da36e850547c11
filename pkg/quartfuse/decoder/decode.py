"""Greedy decoding, optionally restricted to the closed answer set."""
import logging

import numpy as np

from ..misc.exceptions import ConfigError
from ..numcore import Tensor
from ..streams.vocab import BOS, EOS
from .model import DecoderParams, decode_logits

logger = logging.getLogger(__name__)

def greedy_decode(context : Tensor, query_tokens, params : DecoderParams, max_len : int, adapters=None,
                  answer_ids : list[int] | None = None) -> list[int]:
    """
    Emit argmax tokens until <eos> or max_len; ties go to the lowest id.

    With answer_ids the first step may only emit one of them and every later step only <eos>.
    """
    if max_len < 1:
        raise ConfigError("max_answer_len", "must be at least 1")
    prefix = [BOS]
    emitted = []
    with params.workspace.no_grad():
        while len(emitted) < max_len:
            logits = decode_logits(context, query_tokens, prefix, params, adapters)
            scores = logits.data[-1].astype(np.float64)
            if answer_ids is not None:
                allowed = answer_ids if not emitted else [EOS]
                restricted = np.full_like(scores, -np.inf)
                restricted[allowed] = scores[allowed]
                scores = restricted
            token = int(np.argmax(scores))
            emitted.append(token)
            if token == EOS:
                break
            prefix.append(token)
    logger.debug(f"decoded {emitted}")
    return emitted
