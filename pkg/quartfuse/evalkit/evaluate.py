"""
Exact-match evaluation of a checkpoint (or an in-memory model) on a dataset.

Greedy decoding is deterministic, so a report depends only on the parameters, the data
and, for robustness, the perturbation seed.
"""
from concurrent.futures import ThreadPoolExecutor
import logging
import threading

from ..misc.exceptions import ConfigError
from ..perturb import PerturbationSpec, perturb_dataset
from ..pipeline import Checkpoint, FusionModel
from ..quart import alpha_entropy, modality_mass
from ..streams import MODALITIES, MultimodalSample, Vocabulary, oracle_answer
from ..streams.dataset import Dataset
from .report import EvalReport, SampleResult, summarize

logger = logging.getLogger(__name__)

MODEL_ID = "in-memory"
ORACLE_ID = "oracle"

def evaluate_sample(model : FusionModel, sample : MultimodalSample, mode : str = "gated", dropped=(), renormalize : bool = True,
                    constrained : bool = True, max_len : int = 4) -> SampleResult:
    predicted, output = model.predict(sample, mode, dropped, renormalize, constrained, max_len)
    result = SampleResult(
        sample_id=sample.sample_id,
        scenario_id=sample.scenario_id,
        predicted=predicted,
        correct=predicted == list(sample.answer_tokens),
        relevant_modality=sample.relevant_modality,
    )
    if output.alpha is not None:
        result.modality_mass = modality_mass(output.alpha)
        result.alpha_entropy = alpha_entropy(output.alpha)
    return result

class _Models():
    """One model per worker thread; a workspace is never shared between threads."""

    def __init__(self, source):
        self._source = source
        self._local = threading.local()

    def get(self) -> FusionModel:
        if isinstance(self._source, FusionModel):
            return self._source
        if not hasattr(self._local, "model"):
            self._local.model = FusionModel.from_checkpoint(self._source)
        return self._local.model

def _results(source, dataset : Dataset, threads : int, **options) -> list[SampleResult]:
    if isinstance(source, FusionModel) and threads > 1:
        logger.debug("An in-memory model is evaluated on one thread")
        threads = 1
    models = _Models(source)
    models.get().check_dataset(dataset.settings)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(lambda sample: evaluate_sample(models.get(), sample, **options), dataset.samples))

def evaluate(source : Checkpoint | FusionModel, dataset : Dataset, perturb : PerturbationSpec | None = None, seed : int = 0,
             mode : str = "gated", dropped=(), renormalize : bool = True, constrained : bool = True, max_len : int = 4,
             threads : int = 1) -> EvalReport:
    """
    Accuracy and relevance diagnostics on dataset; with perturb, the same metrics on a
    mismatch-perturbed copy drawn from seed are attached as .robustness.
    """
    for m in dropped:
        if m not in MODALITIES:
            raise ConfigError("masks", f"unknown modality {m!r}")
    checkpoint_id = source.checkpoint_id if isinstance(source, Checkpoint) else MODEL_ID
    options = {"mode": mode, "dropped": tuple(dropped), "renormalize": renormalize, "constrained": constrained, "max_len": max_len}

    report = summarize(_results(source, dataset, threads, **options), dataset.dataset_id, checkpoint_id, mode, dropped, renormalize)
    logger.info(f"Evaluated {checkpoint_id} on {dataset.dataset_id}: accuracy {report.accuracy:.3f}")
    if perturb is not None:
        perturbed, _ = perturb_dataset(dataset, perturb, seed, "eval", threads)
        report.robustness = summarize(_results(source, perturbed, threads, **options), f"{dataset.dataset_id}/perturbed-{seed}", checkpoint_id, mode, dropped, renormalize)
        logger.info(f"Accuracy on perturbed copy: {report.robustness.accuracy:.3f}")
    return report

def evaluate_oracle(dataset : Dataset, vocab : Vocabulary | None = None) -> EvalReport:
    """Score the hand-written rule that reads only the relevant streams. It has no α."""
    vocab = vocab or Vocabulary()
    results = []
    for sample in dataset:
        predicted = vocab.answer_tokens(oracle_answer(sample))
        results.append(SampleResult(
            sample_id=sample.sample_id,
            scenario_id=sample.scenario_id,
            predicted=predicted,
            correct=predicted == list(sample.answer_tokens),
            relevant_modality=sample.relevant_modality,
        ))
    return summarize(results, dataset.dataset_id, ORACLE_ID, mode="oracle")
