"""Create the RunConfig class: defaults, JSON config file, QUARTF_ environment overrides and flag overrides."""
from pathlib import Path
import logging
import json
import os

from ..misc.exceptions import ConfigError

ENV_PREFIX = "QUARTF_"

ALGORITHM1_AUDIO_OPS  = ["add-noise", "reverse", "replace-with-irrelevant", "no-perturbation"]
ALGORITHM1_VIDEO_OPS  = ["add-noise", "reverse", "replace-with-irrelevant", "no-perturbation"]
ALGORITHM1_SENSOR_OPS = ["add-jitter", "replace-with-irrelevant", "no-perturbation"]

class RunConfig():
    """
    Every tunable of a quartfuse run, with layered precedence:
    defaults < base snapshot < config file < QUARTF_<KEY> environment variables < explicit overrides.

    Every key is validated before anything is computed; unknown keys are an error.
    """

    def __init__(self, config_file_path : Path | None = None, env : dict | None = None, overrides : dict | None = None,
                 base : dict | None = None):
        self._logger = logging.getLogger(__name__)
        self.config_file_path = config_file_path
        self.customised_keys = []

        self.__init_defaults()
        self._logger.debug("Set default config values")

        # e.g. the snapshot stored in a checkpoint
        for key, value in (base or {}).items():
            self.__set_key(key, value)

        if config_file_path:
            self._logger.debug(f"Loading config values from {config_file_path}")
            self.__load_from_file()

        self.__load_from_env(os.environ if env is None else env)

        for key, value in (overrides or {}).items():
            self.__set_key(key, value)

        self.validate()

    def __init_defaults(self) -> None:
        # Seed, precision and runtime
        self.seed                     : int   = 0
        self.precision                : str   = "f32"
        self.threads                  : int   = os.cpu_count() or 1
        self.log_every                : int   = 50

        # Model dimensions
        self.embed_dim                : int   = 32
        self.quart_heads              : int   = 2
        self.quart_head_dim           : int   = 16
        self.pooling                  : str   = "mean"
        self.vocab_size               : int   = 64
        self.decoder_layers           : int   = 2
        self.decoder_heads            : int   = 2
        self.decoder_mlp_hidden       : int   = 64
        self.max_answer_len           : int   = 4
        self.projection_hidden        : int   = 64

        # Streams: token lengths, native lengths and widths
        self.video_tokens             : int   = 8
        self.audio_tokens             : int   = 6
        self.sensor_tokens            : int   = 4
        self.video_frames             : int   = 16
        self.audio_frames             : int   = 24
        self.sensor_frames            : int   = 32
        self.video_frames_per_token   : int   = 2
        self.audio_frames_per_token   : int   = 4
        self.sensor_frames_per_token  : int   = 8
        self.video_dim                : int   = 24
        self.audio_dim                : int   = 16
        self.sensor_dim               : int   = 6
        self.video_encoded_dim        : int   = 32
        self.audio_encoded_dim        : int   = 32
        self.sensor_encoded_dim       : int   = 16
        self.noise_std                : float = 0.3
        self.signal_amplitude         : float = 1.0
        self.scenarios                : list  = ["visual-event", "off-camera-speech", "motion-only-event", "audio-visual-event"]

        # Stage schedules
        self.stage1_steps             : int   = 500
        self.stage2_steps             : int   = 2000
        self.stage3_steps             : int   = 1000
        self.batch_size               : int   = 16
        self.stage1_schedule          : str   = "sequential"
        self.loss_conditioning        : str   = "on_C"
        self.lambda_reg               : float = 0.001
        self.reg_sign                 : str   = "as_written"
        self.lora_rank                : int   = 8
        self.checkpoint_every         : int   = 0

        # Optimizer
        self.lr_projections           : float = 1e-3
        self.lr_quart                 : float = 1e-3
        self.lr_lora                  : float = 1e-3
        self.weight_decay             : float = 0.03
        self.beta1                    : float = 0.9
        self.beta2                    : float = 0.999
        self.adam_eps                 : float = 1e-8
        self.grad_clip                : float = 0.0

        # Perturbation spec
        self.sigma_rel                : float = 1.0
        self.coin_probability         : float = 0.5
        self.perturb_audio_ops        : list  = list(ALGORITHM1_AUDIO_OPS)
        self.perturb_video_ops        : list  = list(ALGORITHM1_VIDEO_OPS)
        self.perturb_sensor_ops       : list  = list(ALGORITHM1_SENSOR_OPS)
        self.video_extra_ops          : list  = []

        # Datasets and evaluation
        self.train_data               : str   = ""
        self.eval_data                : str   = ""
        self.train_size               : int   = 512
        self.eval_size                : int   = 256
        self.constrained_decoding     : bool  = True
        self.renormalize_masked       : bool  = True
        # Want to add new config keys? Just put them right here, then validate them below.

    def __load_from_file(self) -> None:
        if not Path(self.config_file_path).exists():
            self._logger.error(f"Config file {self.config_file_path} does not exist.")
            raise ConfigError("config", f"file {self.config_file_path} does not exist")

        with open(self.config_file_path, "r", encoding="utf8") as f:
            try:
                config_data = json.load(f)
            except json.JSONDecodeError as e:
                self._logger.error(f"Invalid JSON in config file {self.config_file_path}: {e}")
                raise ConfigError("config", f"invalid JSON in {self.config_file_path}: {e}") from e

        if not isinstance(config_data, dict):
            raise ConfigError("config", "config file must hold a flat JSON object")

        for key, value in config_data.items():
            self.__set_key(key, value)

    def __load_from_env(self, env) -> None:
        for name, value in env.items():
            if not name.startswith(ENV_PREFIX):
                continue
            key = name[len(ENV_PREFIX):].lower()
            self._logger.debug(f"Environment override {name}")
            self.__set_key(key, value)

    def set_key(self, key, value):
        """Set one key after construction and re-validate."""
        self.__set_key(key, value)
        self.validate()

    def __set_key(self, key, value):
        if key not in self.keys():
            self._logger.error(f"Unknown config key '{key}'")
            raise ConfigError(key, "unknown config key")

        self._logger.debug(f"Setting config attribute '{key}' to '{value}'")
        setattr(self, key, _coerce(key, getattr(self, key), value))
        if key not in self.customised_keys:
            self.customised_keys.append(key)

    @staticmethod
    def keys() -> list[str]:
        """All known config keys, in declaration order."""
        return list(_DEFAULT_KEYS)

    def to_dict(self) -> dict:
        """The full key/value snapshot written to a run directory."""
        return {key: (list(value) if isinstance(value, list) else value)
                for key, value in ((key, getattr(self, key)) for key in self.keys())}

    @classmethod
    def from_dict(cls, data : dict) -> "RunConfig":
        """Rebuild a config from a snapshot, ignoring the environment."""
        return cls(env={}, overrides=data)

    def validate(self) -> None:
        """Check every field; the first violation raises ConfigError naming the field."""
        for key in ("embed_dim", "quart_heads", "quart_head_dim", "vocab_size", "decoder_layers", "decoder_heads",
                    "decoder_mlp_hidden", "max_answer_len", "projection_hidden", "batch_size", "lora_rank", "threads",
                    "log_every", "train_size", "eval_size"):
            _require(key, getattr(self, key) >= 1, "must be a positive integer")
        for modality in ("video", "audio", "sensor"):
            for suffix in ("tokens", "frames", "frames_per_token", "dim", "encoded_dim"):
                key = f"{modality}_{suffix}"
                _require(key, getattr(self, key) >= 1, "must be a positive integer")
        for key in ("stage1_steps", "stage2_steps", "stage3_steps", "checkpoint_every"):
            _require(key, getattr(self, key) >= 0, "must be a non-negative integer")

        _require("seed", 0 <= self.seed < 2**64, "must be an unsigned 64-bit integer")
        _require("precision", self.precision in ("f32", "f64"), "must be f32 or f64")
        _require("pooling", self.pooling in ("mean", "last", "max"), "must be mean, last or max")
        _require("quart_head_dim", self.quart_heads * self.quart_head_dim == self.embed_dim,
                 f"quart_heads * quart_head_dim must equal embed_dim ({self.quart_heads} * {self.quart_head_dim} != {self.embed_dim})")
        _require("decoder_heads", self.embed_dim % self.decoder_heads == 0, "must divide embed_dim")
        _require("vocab_size", self.vocab_size >= 24, "must be at least 24 (special, query and answer words)")
        _require("max_answer_len", self.max_answer_len >= 2, "must hold an answer word and <eos>")
        _require("stage1_schedule", self.stage1_schedule in ("sequential", "interleaved"), "must be sequential or interleaved")
        _require("loss_conditioning", self.loss_conditioning in ("on_Z", "on_C"), "must be on_Z or on_C")
        _require("reg_sign", self.reg_sign in ("as_written", "sparsity"), "must be as_written or sparsity")
        _require("lambda_reg", self.lambda_reg >= 0, "must be non-negative")
        _require("noise_std", self.noise_std >= 0, "must be non-negative")
        _require("signal_amplitude", self.signal_amplitude > 0, "must be positive")
        _require("scenarios", len(self.scenarios) > 0, "must name at least one scenario")

        for key in ("lr_projections", "lr_quart", "lr_lora", "adam_eps", "sigma_rel"):
            _require(key, getattr(self, key) > 0, "must be positive")
        for key in ("weight_decay", "grad_clip"):
            _require(key, getattr(self, key) >= 0, "must be non-negative")
        for key in ("beta1", "beta2"):
            _require(key, 0 <= getattr(self, key) < 1, "must lie in [0, 1)")
        _require("coin_probability", 0 <= self.coin_probability <= 1, "must lie in [0, 1]")

        for modality in ("audio", "video", "sensor"):
            key = f"perturb_{modality}_ops"
            _require(key, len(getattr(self, key)) > 0, "must list at least one op")
        # Scenario and op names are resolved against their registries where they are used.

def _require(field, condition, message):
    if not condition:
        raise ConfigError(field, message)

def _coerce(key, default, value):
    """Coerce a file, environment or flag value to the type of the key's default."""
    try:
        if isinstance(default, bool):
            if isinstance(value, str):
                lowered = value.strip().lower()
                if lowered not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                    raise ValueError(value)
                return lowered in ("1", "true", "yes", "on")
            if not isinstance(value, bool):
                raise ValueError(value)
            return value
        if isinstance(default, int):
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError(value)
            return int(value)
        if isinstance(default, float):
            if isinstance(value, bool):
                raise ValueError(value)
            return float(value)
        if isinstance(default, list):
            if isinstance(value, str):
                return [item.strip() for item in value.split(",") if item.strip()]
            if not isinstance(value, list):
                raise ValueError(value)
            return [str(item) for item in value]
        return str(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(key, f"cannot interpret {value!r} as {type(default).__name__}") from e

def _default_keys() -> list[str]:
    blank = RunConfig.__new__(RunConfig)
    blank._RunConfig__init_defaults()
    return list(vars(blank))

_DEFAULT_KEYS = _default_keys()
