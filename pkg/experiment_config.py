"""
Experiment configuration
Sectioned key = value files mapped onto the simulator's parameter dataclasses
"""
import configparser
import logging
from dataclasses import dataclass, field, fields, replace

from acquisition_sim import SourceDetectorModel
from errors import ConfigError, ContractViolationError, SimulationError
from image_synth import OpticalGeometry
from mask_bases import ORDERINGS
from recon import TVParams
from walk_core import WaveguideArray

logger = logging.getLogger(__name__)

SCHEMA = "spi-walk/1"
DEFAULT_SWEEP_FRACTIONS = tuple(round(0.05 * k, 2) for k in range(1, 21))


@dataclass(frozen=True)
class AcquisitionSettings:
    ordering: str = "cake_cutting"
    fractions: tuple = field(default=(1.0,), metadata={"item": float})
    integration_time: float = 1.0     # s per polarity
    raster_time: float = 10.0         # s per superpixel
    raster_radius: float = 1.0        # px
    overhead_per_mask: float = 0.34   # s, upload and settling
    noise: bool = True
    subtract_accidentals: bool = False
    workers: int = 1
    min_library: int = 4

    def __post_init__(self):
        if self.ordering not in ORDERINGS:
            raise ContractViolationError(f"Unknown ordering: {self.ordering}")
        if not self.fractions or any(not 0 < f <= 1 for f in self.fractions):
            raise ContractViolationError(f"fractions must lie in (0, 1], got {self.fractions}")
        object.__setattr__(self, "fractions", tuple(sorted(set(self.fractions))))
        if self.integration_time <= 0 or self.raster_time <= 0:
            raise ContractViolationError("integration and raster times must be > 0")
        if self.overhead_per_mask < 0:
            raise ContractViolationError("overhead_per_mask must be >= 0")
        if self.workers < 1:
            raise ContractViolationError("workers must be >= 1")


@dataclass(frozen=True)
class ReconstructionSettings:
    penalty_weight: float = 4.0
    lagrangian_step: float = 1.0
    tolerance: float = 1e-6
    max_iterations: int = 500
    tv_variant: str = "anisotropic"
    proximal_weight: float = 1.0
    inner_iterations: int = 100
    full_solver: str = "direct"    # spectrum source when every mask was measured
    fit_baseline: bool = False
    normalization: str = "peak"

    def __post_init__(self):
        self.tv_params()
        if self.full_solver not in ("direct", "tv"):
            raise ContractViolationError(f"Unknown full_solver: {self.full_solver}")
        if self.normalization not in ("peak", "unit"):
            raise ContractViolationError(f"Unknown normalization: {self.normalization}")

    def tv_params(self):
        return TVParams(self.penalty_weight, self.lagrangian_step, self.tolerance, self.max_iterations,
                        self.tv_variant, self.proximal_weight, self.inner_iterations)


@dataclass(frozen=True)
class RunSettings:
    seed: int = 1
    output_dir: str = "runs/default"
    input_guides: tuple = field(default=(), metadata={"item": int})  # empty: central guide
    indistinguishable: bool = True
    sweep_fractions: tuple = field(default=DEFAULT_SWEEP_FRACTIONS, metadata={"item": float})
    sweep_orderings: tuple = field(default=("cake_cutting", "russian_dolls"), metadata={"item": str})
    sweep_seeds: tuple = field(default=(), metadata={"item": int})    # empty: seed only

    def __post_init__(self):
        if len(self.input_guides) > 2:
            raise ContractViolationError("at most two input guides")
        unknown = [o for o in self.sweep_orderings if o not in ORDERINGS]
        if unknown:
            raise ContractViolationError(f"Unknown sweep ordering(s): {', '.join(unknown)}")

    @property
    def seeds(self):
        return self.sweep_seeds or (self.seed,)


@dataclass(frozen=True)
class ExperimentConfig:
    walk: WaveguideArray = field(default_factory=WaveguideArray)
    geometry: OpticalGeometry = field(default_factory=OpticalGeometry)
    source: SourceDetectorModel = field(default_factory=SourceDetectorModel)
    acquisition: AcquisitionSettings = field(default_factory=AcquisitionSettings)
    reconstruction: ReconstructionSettings = field(default_factory=ReconstructionSettings)
    run: RunSettings = field(default_factory=RunSettings)

    def __post_init__(self):
        if self.geometry.num_modes != self.walk.num_guides:
            raise ConfigError(f"geometry has {self.geometry.num_modes} modes but the array has "
                              f"{self.walk.num_guides} guides")

    @property
    def model(self):
        """Source model with noise switched off when the run is noiseless"""
        return self.source if self.acquisition.noise else self.source.without_noise()

    def with_overrides(self, seed=None, output_dir=None, noise=None, workers=None):
        """Copy with global command-line flags applied"""
        run, acquisition = self.run, self.acquisition
        if seed is not None:
            run = replace(run, seed=seed)
        if output_dir is not None:
            run = replace(run, output_dir=str(output_dir))
        if noise is not None:
            acquisition = replace(acquisition, noise=noise)
        if workers is not None:
            acquisition = replace(acquisition, workers=workers)
        return replace(self, run=run, acquisition=acquisition)


SECTIONS = {
    "walk": WaveguideArray,
    "geometry": OpticalGeometry,
    "source": SourceDetectorModel,
    "acquisition": AcquisitionSettings,
    "reconstruction": ReconstructionSettings,
    "run": RunSettings,
}


def default_config():
    return ExperimentConfig()


def _convert(section, key, raw, default, item):
    try:
        if isinstance(default, bool):
            lowered = raw.strip().lower()
            if lowered not in configparser.ConfigParser.BOOLEAN_STATES:
                raise ValueError(raw)
            return configparser.ConfigParser.BOOLEAN_STATES[lowered]
        if isinstance(default, tuple):
            return tuple(item(v.strip()) for v in raw.split(",") if v.strip())
        return type(default)(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {type(default).__name__}") from exc


def _format(value):
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    return str(value)


def parse_config(text, source="<string>"):
    """Parse config text; unknown sections or keys and a missing schema tag are errors"""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    if not parser.has_section("meta") or parser.get("meta", "schema", fallback=None) != SCHEMA:
        raise ConfigError(f"{source}: missing or unsupported schema tag (expected [meta] schema = {SCHEMA})")
    extra_meta = set(parser.options("meta")) - {"schema"}
    if extra_meta:
        raise ConfigError(f"{source}: unknown key(s) in [meta]: {', '.join(sorted(extra_meta))}")
    unknown = set(parser.sections()) - set(SECTIONS) - {"meta"}
    if unknown:
        raise ConfigError(f"{source}: unknown section(s): {', '.join(sorted(unknown))}")

    parts = {}
    for name, cls in SECTIONS.items():
        defaults = cls()
        known = {f.name: f for f in fields(cls)}
        values = {}
        if parser.has_section(name):
            for key, raw in parser.items(name):
                if key not in known:
                    raise ConfigError(f"{source}: unknown key [{name}] {key}")
                if known[key].metadata.get("auto") and raw.strip().lower() == "auto":
                    values[key] = None
                    continue
                item = known[key].metadata.get("item", str)
                values[key] = _convert(name, key, raw, getattr(defaults, key), item)
        try:
            parts[name] = cls(**values)
        except SimulationError as exc:
            raise ConfigError(f"{source}: [{name}] {exc}") from exc
    return ExperimentConfig(**parts)


def load_config(path):
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = parse_config(text, source=str(path))
    logger.info("[OK] Loaded config %s", path)
    return cfg


def render_config(cfg):
    """Deterministic text form; parse_config(render_config(cfg)) == cfg"""
    lines = ["[meta]", f"schema = {SCHEMA}", ""]
    for name in SECTIONS:
        part = getattr(cfg, name)
        lines.append(f"[{name}]")
        for f in fields(part):
            lines.append(f"{f.name} = {_format(getattr(part, f.name))}")
        lines.append("")
    return "\n".join(lines)


def write_config(path, cfg):
    with open(path, "w") as f:
        f.write(render_config(cfg))
