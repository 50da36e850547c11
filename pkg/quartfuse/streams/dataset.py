"""
Datasets of MultimodalSamples and their on-disk form.

A dataset directory holds dataset.json (settings, seed, kind), manifest.jsonl (one record
per sample) and one QTNS blob file per modality. Clean samples are a cache of their
seeds: regenerating from the manifest must reproduce the blobs bit for bit.
"""
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
import hashlib
import logging
import json

from ..misc.exceptions import FormatError, InputError
from ..misc.seeds import derive_seed
from ..numcore import read_array, write_array
from .generator import gen_sample
from .types import MODALITIES, MultimodalSample, RawStream, StreamSettings
from .vocab import Vocabulary

MANIFEST_NAME = "manifest.jsonl"
DATASET_INFO_NAME = "dataset.json"
DATASET_FORMAT_VERSION = 1

class Dataset():
    """An ordered collection of samples generated under one StreamSettings."""

    def __init__(self, samples : list[MultimodalSample], settings : StreamSettings, seed : int, kind : str = "clean"):
        self._logger = logging.getLogger(__name__)
        self.samples = list(samples)
        self.settings = settings
        self.seed = seed
        self.kind = kind

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, index : int) -> MultimodalSample:
        return self.samples[index]

    def __iter__(self):
        return iter(self.samples)

    @classmethod
    def generate(cls, n : int, seed : int, settings : StreamSettings, scenarios : list[str], vocab : Vocabulary | None = None, threads : int = 1) -> "Dataset":
        """Sample i uses seed derive_seed(seed, "sample", i) and scenario derive_seed(seed, "scenario", i) mod len(scenarios)."""
        if n < 1:
            raise InputError("a dataset needs at least one sample")
        vocab = vocab or Vocabulary()

        def make(i):
            scenario = scenarios[derive_seed(seed, "scenario", i) % len(scenarios)]
            return gen_sample(derive_seed(seed, "sample", i), scenario, settings, vocab, sample_id=i)

        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            samples = list(pool.map(make, range(n)))
        return cls(samples, settings, seed)

    def by_scenario(self, scenario : str) -> "Dataset":
        return Dataset([s for s in self.samples if s.scenario_id == scenario], self.settings, self.seed, self.kind)

    @property
    def dataset_id(self) -> str:
        """Short hash over the manifest records, stable across save/load."""
        digest = hashlib.sha256()
        for sample in self.samples:
            digest.update(json.dumps(_record(sample), sort_keys=True).encode("utf8"))
        return digest.hexdigest()[:16]

    def save(self, path : Path, extra_records : list[dict] | None = None) -> None:
        """Write dataset.json, manifest.jsonl and one blob file per modality."""
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)

        offsets = {sample.sample_id: {} for sample in self.samples}
        for modality in MODALITIES:
            with open(path / f"{modality}.qtns", "wb") as blob_file:
                for sample in self.samples:
                    offsets[sample.sample_id][modality] = list(write_array(blob_file, sample.stream(modality).frames))

        with open(path / MANIFEST_NAME, "w", encoding="utf8") as manifest:
            for sample in self.samples:
                record = _record(sample)
                record["blobs"] = offsets[sample.sample_id]
                manifest.write(json.dumps(record, sort_keys=True) + "\n")

        info = {
            "format_version": DATASET_FORMAT_VERSION,
            "kind": self.kind,
            "seed": self.seed,
            "n": len(self.samples),
            "settings": self.settings.to_dict(),
        }
        (path / DATASET_INFO_NAME).write_text(json.dumps(info, sort_keys=True, indent=2), encoding="utf8")

        if extra_records is not None:
            with open(path / "records.jsonl", "w", encoding="utf8") as records:
                for record in extra_records:
                    records.write(json.dumps(record, sort_keys=True) + "\n")
        self._logger.info(f"Saved {len(self.samples)} {self.kind} samples to {path}")

    @classmethod
    def load(cls, path : Path, verify : bool = False) -> "Dataset":
        """Read a dataset directory; with verify, regenerate clean samples from their seeds and compare."""
        path = Path(path)
        logger = logging.getLogger(__name__)
        info_file = path / DATASET_INFO_NAME
        if not info_file.exists():
            logger.error(f"Dataset info {info_file} missing.")
            raise FormatError(f"{info_file} is missing; is {path} a dataset directory?")

        try:
            info = json.loads(info_file.read_text(encoding="utf8"))
        except json.JSONDecodeError as e:
            raise FormatError(f"invalid JSON in {info_file}: {e}") from e
        if info.get("format_version") != DATASET_FORMAT_VERSION:
            raise FormatError(f"dataset format version {info.get('format_version')} is not supported (expected {DATASET_FORMAT_VERSION})")

        settings = StreamSettings.from_dict(info["settings"])
        blobs = {m: (path / f"{m}.qtns").read_bytes() for m in MODALITIES}
        samples = []
        with open(path / MANIFEST_NAME, "r", encoding="utf8") as manifest:
            for line in manifest:
                record = json.loads(line)
                streams = {}
                for modality in MODALITIES:
                    offset, length = record["blobs"][modality]
                    streams[modality] = RawStream(modality=modality, frames=read_array(blobs[modality], offset, length),
                                                  sample_rate=settings.layout(modality).sample_rate)
                samples.append(MultimodalSample(
                    sample_id=record["sample_id"],
                    query_tokens=record["query_tokens"],
                    answer_tokens=record["answer_tokens"],
                    relevant_modality=frozenset(record["relevant_modality"]),
                    scenario_id=record["scenario_id"],
                    seed=record["seed"],
                    stream_labels=record.get("stream_labels", {}),
                    **streams,
                ))

        if len(samples) != info["n"]:
            raise FormatError(f"manifest lists {len(samples)} samples, dataset.json says {info['n']}")
        dataset = cls(samples, settings, info["seed"], info["kind"])
        if verify:
            dataset.verify()
        return dataset

    def verify(self) -> None:
        """Regenerate every clean sample from its seed; any difference is a FormatError."""
        if self.kind != "clean":
            raise FormatError(f"only clean datasets can be regenerated from seeds, this one is {self.kind}")
        for sample in self.samples:
            fresh = gen_sample(sample.seed, sample.scenario_id, self.settings, sample_id=sample.sample_id)
            if _record(fresh) != _record(sample) or any(
                    fresh.stream(m).frames.tobytes() != sample.stream(m).frames.tobytes() for m in MODALITIES):
                raise FormatError(f"sample {sample.sample_id} does not match its regeneration from seed {sample.seed}")
        self._logger.debug(f"Verified {len(self.samples)} samples against their seeds")

def _record(sample : MultimodalSample) -> dict:
    return {
        "sample_id": sample.sample_id,
        "seed": sample.seed,
        "scenario_id": sample.scenario_id,
        "relevant_modality": sorted(sample.relevant_modality),
        "query_tokens": list(sample.query_tokens),
        "answer_tokens": list(sample.answer_tokens),
        "stream_labels": dict(sample.stream_labels),
    }
