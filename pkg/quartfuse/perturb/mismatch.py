"""
Cross-modal mismatch generation.

Per modality, in the order audio, video, sensor: flip a coin; on heads apply one op drawn
uniformly from that modality's set (no-perturbation included), otherwise pass the stream
through. Coin, op choice and op parameters each draw from their own sub-seed.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging

from ..misc.exceptions import ConfigError
from ..misc.seeds import derive_seed, rng_for
from ..streams import MultimodalSample
from ..streams.dataset import Dataset
from .ops import OpContext, PerturbationOp

logger = logging.getLogger(__name__)

PERTURB_ORDER = ("audio", "video", "sensor")

DEFAULT_OPS = {
    "audio": ("add-noise", "reverse", "replace-with-irrelevant", "no-perturbation"),
    "video": ("add-noise", "reverse", "replace-with-irrelevant", "no-perturbation"),
    "sensor": ("add-jitter", "replace-with-irrelevant", "no-perturbation"),
}

@dataclass(frozen=True)
class PerturbationSpec:
    """Enabled op names per modality, the noise scale and the coin bias."""
    ops: dict = field(default_factory=lambda: {m: tuple(names) for m, names in DEFAULT_OPS.items()})
    sigma_rel: float = 1.0
    coin_probability: float = 0.5

    def __post_init__(self):
        if set(self.ops) != set(PERTURB_ORDER):
            raise ConfigError("perturb", f"op sets must be given for {', '.join(PERTURB_ORDER)}")
        for modality, names in self.ops.items():
            if not names:
                raise ConfigError(f"perturb_{modality}_ops", "needs at least one op")
            for name in names:
                op = PerturbationOp.lookup(name, field=f"perturb_{modality}_ops")
                if modality not in op.APPLIES_TO:
                    raise ConfigError(f"perturb_{modality}_ops", f"{name} does not apply to {modality}")
        if self.sigma_rel <= 0:
            raise ConfigError("sigma_rel", "must be positive")
        if not 0.0 <= self.coin_probability <= 1.0:
            raise ConfigError("coin_probability", "must lie in [0, 1]")

    @classmethod
    def from_config(cls, config) -> "PerturbationSpec":
        ops = {
            "audio": tuple(config.perturb_audio_ops),
            "video": tuple(config.perturb_video_ops) + tuple(config.video_extra_ops),
            "sensor": tuple(config.perturb_sensor_ops),
        }
        return cls(ops=ops, sigma_rel=config.sigma_rel, coin_probability=config.coin_probability)

    def to_dict(self) -> dict:
        return {"ops": {m: list(self.ops[m]) for m in PERTURB_ORDER}, "sigma_rel": self.sigma_rel, "coin_probability": self.coin_probability}

@dataclass
class PerturbationRecord:
    """Per modality: the coin, the chosen op (None on tails) and the op's parameters."""
    sample_id: int
    seed: int
    coins: dict = field(default_factory=dict)
    ops: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    @property
    def perturbed_modalities(self) -> list[str]:
        """Modalities whose stream an op actually changed."""
        return [m for m in PERTURB_ORDER if self.ops.get(m) is not None and PerturbationOp.lookup(self.ops[m]).CHANGES_STREAM]

    def to_dict(self) -> dict:
        return {"sample_id": self.sample_id, "seed": self.seed, "coins": dict(self.coins), "ops": dict(self.ops), "params": dict(self.params)}

    @classmethod
    def from_dict(cls, data : dict) -> "PerturbationRecord":
        return cls(sample_id=data["sample_id"], seed=data["seed"], coins=dict(data["coins"]), ops=dict(data["ops"]), params=dict(data["params"]))

def generate_mismatch(sample : MultimodalSample, spec : PerturbationSpec, seed : int, dataset=None) -> tuple[MultimodalSample, PerturbationRecord]:
    """Perturb one sample; labels and query are never touched. dataset supplies replacement streams."""
    record = PerturbationRecord(sample_id=sample.sample_id, seed=seed)
    context = OpContext(sample_id=sample.sample_id, dataset=dataset, sigma_rel=spec.sigma_rel)
    streams = {}
    for modality in PERTURB_ORDER:
        heads = bool(rng_for(seed, "coin", modality).random() < spec.coin_probability)
        record.coins[modality] = heads
        if not heads:
            record.ops[modality] = None
            continue
        names = spec.ops[modality]
        name = names[int(rng_for(seed, "op", modality).integers(len(names)))]
        op = PerturbationOp.lookup(name)()
        stream, params = op(sample.stream(modality), rng_for(seed, "params", modality), context)
        record.ops[modality] = name
        record.params[modality] = params
        if op.CHANGES_STREAM:
            streams[modality] = stream
    logger.debug(f"sample {sample.sample_id}: {record.ops}")
    return (sample.with_streams(**streams) if streams else sample), record

def sample_seed(seed : int, label, sample_id : int) -> int:
    """Per-sample perturbation seed; label is a training step or "eval"."""
    return derive_seed(seed, "perturb", label, sample_id)

def perturb_dataset(dataset : Dataset, spec : PerturbationSpec, seed : int, label="eval", threads : int = 1) -> tuple[Dataset, list[PerturbationRecord]]:
    """Perturb every sample, drawing replacements from the clean dataset itself."""

    def one(sample):
        return generate_mismatch(sample, spec, sample_seed(seed, label, sample.sample_id), dataset)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(one, dataset.samples))
    perturbed = Dataset([s for s, _ in results], dataset.settings, seed, kind="perturbed")
    records = [r for _, r in results]
    logger.info(f"Perturbed {len(records)} samples, {sum(1 for r in records if r.perturbed_modalities)} with at least one changed stream")
    return perturbed, records
