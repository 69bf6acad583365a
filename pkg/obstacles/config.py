"""
Pipeline configuration: a JSON document with one object per section, each
validated by the matching form in ``obstacles.forms``.
"""
from dataclasses import dataclass, field, replace
import json
import logging
import math
from pathlib import Path

from .core import CameraModel, CameraMount, RoiPolygon
from .exceptions import ConfigError, ParameterError
from .forms import SECTION_FORMS
from .rgb import ExtractParams, GraphSegParams, PreprocParams
from .slic import SlicParams
from .stereo import DbscanParams, RansacParams, StereoParams

logger = logging.getLogger(__name__)

# Horizontal field of view (degrees) and baseline (metres) of supported stereo cameras.
CAMERA_PRESETS = {
    'd455': (87.0, 0.095),
    'zed2': (110.0, 0.12),
}

REQUIRED_SECTIONS = ('camera', 'roi')


def camera_preset(name, width=1280, height=720):
    """Pinhole model of a preset camera at the given resolution, principal point centred."""
    try:
        hfov_deg, baseline = CAMERA_PRESETS[name]
    except KeyError:
        raise ParameterError(f"unknown camera preset {name!r}; choose from {sorted(CAMERA_PRESETS)}")
    focal = (width / 2) / math.tan(math.radians(hfov_deg) / 2)
    return CameraModel(focal, focal, (width - 1) / 2, (height - 1) / 2, baseline, width, height)


@dataclass(frozen=True)
class StereoLimits:
    min_height: float = 0.03
    max_height: float = 2.5
    max_range: float = 15.0


@dataclass(frozen=True)
class FusionParams:
    dist_threshold: float = 40.0
    match_radius: float = 40.0
    window: int = 5
    min_presence: int = 3
    priority: str = 'stereo,rgb'

    @property
    def priority_order(self):
        return tuple(self.priority.split(','))


@dataclass(frozen=True)
class RuntimeParams:
    threads: int = 1
    dense_cloud: bool = False


@dataclass(frozen=True)
class PipelineConfig:
    camera: CameraModel
    roi: RoiPolygon
    mount: CameraMount = field(default_factory=CameraMount)
    preproc: PreprocParams = field(default_factory=PreprocParams)
    graphseg: GraphSegParams = field(default_factory=GraphSegParams)
    extract: ExtractParams = field(default_factory=ExtractParams)
    slic: SlicParams = field(default_factory=SlicParams)
    stereo: StereoLimits = field(default_factory=StereoLimits)
    ransac: RansacParams = field(default_factory=RansacParams)
    dbscan: DbscanParams = field(default_factory=DbscanParams)
    fusion: FusionParams = field(default_factory=FusionParams)
    runtime: RuntimeParams = field(default_factory=RuntimeParams)

    def stereo_params(self):
        return StereoParams(
            slic=self.slic,
            ransac=self.ransac,
            dbscan=self.dbscan,
            mount=self.mount,
            min_height=self.stereo.min_height,
            max_height=self.stereo.max_height,
            max_range=self.stereo.max_range,
            dense=self.runtime.dense_cloud,
        )

    def with_seed(self, seed):
        return replace(self, ransac=replace(self.ransac, seed=seed))

    def with_threads(self, threads):
        return replace(self, runtime=replace(self.runtime, threads=threads))


def _section_dict(section):
    return {name: getattr(section, name) for name in section.__dataclass_fields__}


def config_to_dict(cfg):
    data = {}
    for name in SECTION_FORMS:
        section = getattr(cfg, name)
        if name == 'roi':
            data[name] = {'vertices': [list(v) for v in section.vertices]}
        else:
            data[name] = _section_dict(section)
    return data


def _default_sections():
    defaults = {
        'mount': CameraMount(), 'preproc': PreprocParams(), 'graphseg': GraphSegParams(),
        'extract': ExtractParams(), 'slic': SlicParams(), 'stereo': StereoLimits(),
        'ransac': RansacParams(), 'dbscan': DbscanParams(), 'fusion': FusionParams(),
        'runtime': RuntimeParams(),
    }
    return {name: _section_dict(value) for name, value in defaults.items()}


SECTION_TYPES = {
    'camera': CameraModel, 'mount': CameraMount, 'roi': RoiPolygon, 'preproc': PreprocParams,
    'graphseg': GraphSegParams, 'extract': ExtractParams, 'slic': SlicParams,
    'stereo': StereoLimits, 'ransac': RansacParams, 'dbscan': DbscanParams,
    'fusion': FusionParams, 'runtime': RuntimeParams,
}


def parse_config(mapping):
    """Validate a configuration mapping and build a PipelineConfig.

    Every problem is collected into a single ConfigError. Omitted sections and
    keys take their defaults, except for ``camera`` and ``roi``.
    """
    if not isinstance(mapping, dict):
        raise ConfigError({'config': ["Configuration must be an object of sections."]})

    errors = {}
    for name in sorted(set(mapping) - set(SECTION_FORMS)):
        errors[name] = ["Unknown section."]
    for name in REQUIRED_SECTIONS:
        if name not in mapping:
            errors[name] = ["This section is required."]

    defaults = _default_sections()
    sections = {}
    for name, form_class in SECTION_FORMS.items():
        if name in REQUIRED_SECTIONS and name not in mapping:
            continue
        given = mapping.get(name, {})
        if not isinstance(given, dict):
            errors[name] = ["Section must be an object."]
            continue
        form = form_class(data={**defaults.get(name, {}), **given})
        for key in form.unknown_keys():
            errors[f"{name}.{key}"] = ["Unknown key."]
        if not form.is_valid():
            for key, messages in form.errors.items():
                label = name if key == '__all__' else f"{name}.{key}"
                errors.setdefault(label, []).extend(messages)
            continue
        sections[name] = form.cleaned_data

    if errors:
        raise ConfigError(errors)

    built = {}
    for name, cleaned in sections.items():
        if name == 'roi':
            built[name] = RoiPolygon(tuple(cleaned['vertices']))
            continue
        cls = SECTION_TYPES[name]
        kwargs = {key: cleaned[key] for key in cls.__dataclass_fields__}
        try:
            built[name] = cls(**kwargs)
        except ParameterError as e:
            errors[name] = [str(e)]
    if errors:
        raise ConfigError(errors)
    return PipelineConfig(**built)


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigError({'config': [f"cannot read {path}: {e.strerror}"]})
    try:
        mapping = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError({'config': [f"{path}: invalid JSON at line {e.lineno}: {e.msg}"]})
    cfg = parse_config(mapping)
    logger.debug("loaded configuration from %s", path)
    return cfg


def dump_config(cfg, path=None):
    text = json.dumps(config_to_dict(cfg), indent=2) + '\n'
    if path is not None:
        Path(path).write_text(text, encoding='utf-8')
    return text
