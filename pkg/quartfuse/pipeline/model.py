"""
FusionModel: the encoders, projections, gating module, decoder and adapters of one run,
with their parameters organised in named groups.
"""
import logging

import numpy as np

from ..base.config import RunConfig
from ..decoder import DecoderConfig, DecoderParams, LoraAdapters, decode_logits, greedy_decode, init_decoder, init_lora, loss_quart, loss_reg, loss_total
from ..misc.exceptions import ConfigError
from ..numcore import Tensor, Workspace
from ..quart import QuartConfig, QuartOutput, alpha_entropy, forward, init_quart, modality_mass
from ..streams import MODALITIES, BOS, MultimodalSample, StreamSettings, TokenSequence, Vocabulary, encode, init_stream_params, project

logger = logging.getLogger(__name__)

GROUPS = ("encoders", "projections", "quart", "decoder", "lora")

class SampleLoss():
    """Loss terms and diagnostics of one sample."""

    def __init__(self, total : Tensor, quart : Tensor, reg : Tensor | None, output : QuartOutput | None):
        self.total = total
        self.quart = quart
        self.reg = reg
        self.output = output

    @property
    def alpha(self):
        return None if self.output is None else self.output.alpha

class FusionModel():
    """Every parameter of a run, created from one seed in one workspace."""

    def __init__(self, workspace : Workspace, settings : StreamSettings, quart_config : QuartConfig, decoder_config : DecoderConfig,
                 lora_rank : int, seed : int, vocab : Vocabulary | None = None):
        self._logger = logging.getLogger(__name__)
        if decoder_config.embed_dim != settings.embed_dim or quart_config.embed_dim != settings.embed_dim:
            raise ConfigError("embed_dim", "streams, gating module and decoder must share one embedding width")
        self.workspace = workspace
        self.settings = settings
        self.vocab = vocab or Vocabulary(decoder_config.vocab_size)
        self.seed = seed
        self.encoders, self.projections = init_stream_params(workspace, settings, seed)
        self.quart = init_quart(workspace, quart_config, seed)
        self.decoder : DecoderParams = init_decoder(workspace, decoder_config, seed)
        self.lora : LoraAdapters = init_lora(workspace, self.decoder, lora_rank, seed)
        self.set_trainable(())

    @classmethod
    def from_config(cls, config, workspace : Workspace | None = None) -> "FusionModel":
        settings = StreamSettings.from_config(config)
        quart_config = QuartConfig(heads=config.quart_heads, head_dim=config.quart_head_dim, embed_dim=config.embed_dim,
                                   total_tokens=settings.total_tokens, pooling=config.pooling)
        return cls(workspace or Workspace(config.precision), settings, quart_config, DecoderConfig.from_config(config),
                   config.lora_rank, config.seed, Vocabulary(config.vocab_size))

    @classmethod
    def from_checkpoint(cls, checkpoint) -> "FusionModel":
        """A fresh model (own workspace) holding a checkpoint's parameters."""
        model = cls.from_config(RunConfig.from_dict(checkpoint.config))
        model.load_arrays(checkpoint.params)
        return model

    def check_dataset(self, settings : StreamSettings) -> None:
        """A dataset is usable when every stream has the token count, window and width this model was built for."""
        for m in MODALITIES:
            ours, theirs = self.settings.layout(m), settings.layout(m)
            for key in ("tokens", "frames_per_token", "dim"):
                if getattr(ours, key) != getattr(theirs, key):
                    raise ConfigError(f"{m}_{key}", f"dataset has {getattr(theirs, key)}, the model was built for {getattr(ours, key)}")

    ################################################################################
    # Parameter groups
    ################################################################################

    def groups(self) -> dict[str, dict[str, Tensor]]:
        """Parameters keyed by group, then by their name inside the group."""
        encoders, projections = {}, {}
        for m in MODALITIES:
            encoders.update({f"{m}.{k}": v for k, v in self.encoders[m].parameters().items()})
            projections.update({f"{m}.{k}": v for k, v in self.projections[m].parameters().items()})
        return {
            "encoders": encoders,
            "projections": projections,
            "quart": self.quart.parameters(),
            "decoder": self.decoder.parameters(),
            "lora": self.lora.parameters(),
        }

    def named_parameters(self) -> dict[str, Tensor]:
        return {f"{group}.{name}": tensor for group, params in self.groups().items() for name, tensor in params.items()}

    def set_trainable(self, trainable) -> None:
        trainable = set(trainable)
        unknown = trainable - set(GROUPS)
        if unknown:
            raise ConfigError("trainable", f"unknown parameter groups {sorted(unknown)}")
        for group, params in self.groups().items():
            for tensor in params.values():
                tensor.requires_grad = group in trainable

    def load_arrays(self, arrays : dict[str, np.ndarray], groups=GROUPS) -> None:
        """Copy arrays of the given groups into the parameters in place; names and shapes must match exactly."""
        named = {name: t for name, t in self.named_parameters().items() if name.split(".", 1)[0] in groups}
        arrays = {name: a for name, a in arrays.items() if name.split(".", 1)[0] in groups}
        if set(arrays) != set(named):
            missing, extra = sorted(set(named) - set(arrays)), sorted(set(arrays) - set(named))
            raise ConfigError("checkpoint", f"parameter names differ (missing {missing[:3]}, unexpected {extra[:3]})")
        for name, tensor in named.items():
            if list(arrays[name].shape) != tensor.shape:
                raise ConfigError("checkpoint", f"{name} has shape {list(arrays[name].shape)}, the model expects {tensor.shape}")
            tensor.data[...] = arrays[name].astype(tensor.data.dtype)

    ################################################################################
    # Forward passes
    ################################################################################

    def tokens(self, sample : MultimodalSample, dropped=()) -> tuple[TokenSequence, TokenSequence, TokenSequence]:
        """Encode and project every stream; dropped modalities become zero tokens."""
        sequences = []
        for m in MODALITIES:
            encoded, valid = encode(sample.stream(m), self.encoders[m])
            sequence = project(encoded, self.projections[m], self.settings.offset(m), valid)
            if m in dropped:
                sequence = TokenSequence(modality=m, tokens=self.workspace.zeros(sequence.tokens.shape),
                                         global_positions=sequence.global_positions, valid=sequence.valid)
            sequences.append(sequence)
        return tuple(sequences)

    def query_embeddings(self, query_tokens) -> Tensor:
        return self.decoder.embed(query_tokens)

    def forward(self, sample : MultimodalSample, mode : str = "gated", dropped=(), renormalize : bool = True) -> QuartOutput:
        for m in dropped:
            if m not in MODALITIES:
                raise ConfigError("masks", f"unknown modality {m!r}")
        zv, za, zs = self.tokens(sample, dropped)
        return forward(self.query_embeddings(sample.query_tokens), zv, za, zs, self.quart, self.settings, mode, tuple(dropped), renormalize)

    def answer_loss(self, sample : MultimodalSample, conditioning : str = "on_C", lam : float = 0.0, reg_sign : str = "as_written") -> SampleLoss:
        """
        Teacher-forced L_QuART on the sample's answer, plus λ·L_reg.

        on_C conditions the decoder on the fused row; on_Z on the raw token matrix. α is
        still computed under on_Z when λ > 0 so the regulariser has something to act on.
        """
        if conditioning not in ("on_C", "on_Z"):
            raise ConfigError("loss_conditioning", f"must be on_C or on_Z, got {conditioning!r}")
        needs_alpha = conditioning == "on_C" or lam > 0
        gated = self.forward(sample, "gated") if needs_alpha else None
        context = gated.context if conditioning == "on_C" else self.forward(sample, "raw").context
        answer = list(sample.answer_tokens)
        logits = decode_logits(context, sample.query_tokens, [BOS] + answer[:-1], self.decoder, self.lora)
        quart = loss_quart(logits, answer)
        reg = loss_reg(gated.alpha) if gated is not None and lam > 0 else None
        return SampleLoss(loss_total(quart, reg, lam, reg_sign), quart, reg, gated)

    def caption_loss(self, sample : MultimodalSample, modality : str) -> SampleLoss:
        """Predict the word planted in one stream from that stream's projected tokens alone."""
        sequence = self.tokens(sample)[MODALITIES.index(modality)]
        target = self.vocab.answer_tokens(sample.stream_labels[modality])
        logits = decode_logits(sequence.tokens, self.vocab.caption_query(modality), [BOS] + target[:-1], self.decoder, self.lora)
        quart = loss_quart(logits, target)
        return SampleLoss(quart, quart, None, None)

    def predict(self, sample : MultimodalSample, mode : str = "gated", dropped=(), renormalize : bool = True,
                constrained : bool = True, max_len : int = 4) -> tuple[list[int], QuartOutput]:
        """Greedy answer tokens and the gating output they were conditioned on."""
        with self.workspace.no_grad():
            output = self.forward(sample, mode, dropped, renormalize)
            answer_ids = self.vocab.answer_ids if constrained else None
            tokens = greedy_decode(output.context, sample.query_tokens, self.decoder, max_len, self.lora, answer_ids)
        return tokens, output

def diagnostics(output : QuartOutput | None) -> dict:
    """α entropy and per-modality mass of one forward, or empty for raw conditioning."""
    if output is None or output.alpha is None:
        return {}
    return {"alpha_entropy": alpha_entropy(output.alpha), "modality_mass": modality_mass(output.alpha)}
