"""Pipeline configuration: every module's settings in one INI-style file.

Values are written with ``repr`` and read back with ``ast.literal_eval``,
so a save/load round trip is exact.
"""
import ast
import configparser
import dataclasses
from dataclasses import dataclass, field

from .features import FeatureConfig
from .learn.evaluate import SplitConfig
from .learn.models import LogisticConfig, RBFConfig
from .persistence import DiagramConfig
from .segmentation import ExtractionConfig
from .synth import SynthConfig
from .vectorize import ImageConfig, TopoConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    synth: SynthConfig = field(default_factory=SynthConfig)
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    logistic: LogisticConfig = field(default_factory=LogisticConfig)
    rbf: RBFConfig = field(default_factory=RBFConfig)
    split: SplitConfig = field(default_factory=SplitConfig)

    def with_seed(self, seed):
        """Propagate one top-level seed into every seeded component."""
        f = self.features
        return dataclasses.replace(
            self, seed=seed,
            synth=dataclasses.replace(self.synth, seed=seed),
            extraction=dataclasses.replace(self.extraction, seed=seed),
            features=dataclasses.replace(f, seed=seed, diagram=dataclasses.replace(f.diagram, seed=seed)),
            rbf=dataclasses.replace(self.rbf, seed=seed),
            split=dataclasses.replace(self.split, seed=seed))


def _flatten(obj, prefix=""):
    out = {}
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        if dataclasses.is_dataclass(v):
            out.update(_flatten(v, prefix + f.name + "."))
        else:
            out[prefix + f.name] = v
    return out


_SECTIONS = ("synth", "extraction", "features", "logistic", "rbf", "split")


def to_ini(cfg):
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["pipeline"] = {"seed": repr(cfg.seed)}
    for sec in _SECTIONS:
        cp[sec] = {k: repr(v) for k, v in _flatten(getattr(cfg, sec)).items()}
    lines = []
    for sec in cp.sections():
        lines.append(f"[{sec}]")
        lines += [f"{k} = {v}" for k, v in cp[sec].items()]
        lines.append("")
    return "\n".join(lines)


def save_config(cfg, path):
    with open(path, "w") as fh:
        fh.write(to_ini(cfg))


def _rebuild(cls, flat, where):
    kwargs = {}
    names = {f.name: f for f in dataclasses.fields(cls)}
    nested = {}
    for key, value in flat.items():
        head, _, rest = key.partition(".")
        if head not in names:
            raise ConfigError(f"[{where}] unknown key {key!r}")
        if rest:
            nested.setdefault(head, {})[rest] = value
        else:
            kwargs[head] = value
    defaults = cls()
    for head, sub in nested.items():
        kwargs[head] = _rebuild(type(getattr(defaults, head)), sub, where)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}] {exc}") from None


def from_ini(text):
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0]) from None
    unknown = set(cp.sections()) - set(_SECTIONS) - {"pipeline"}
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")

    def parse(sec):
        out = {}
        for k, v in (cp[sec].items() if cp.has_section(sec) else []):
            try:
                out[k] = ast.literal_eval(v)
            except (ValueError, SyntaxError):
                raise ConfigError(f"[{sec}] {k}: cannot parse value {v!r}") from None
        return out

    top = parse("pipeline")
    extra = set(top) - {"seed"}
    if extra:
        raise ConfigError(f"[pipeline] unknown key(s) {sorted(extra)}")
    parts = {sec: _rebuild(type(getattr(PipelineConfig(), sec)), parse(sec), sec) for sec in _SECTIONS}
    return PipelineConfig(seed=top.get("seed", 0), **parts)


def load_config(path):
    with open(path) as fh:
        return from_ini(fh.read())


__all__ = ["PipelineConfig", "ConfigError", "to_ini", "from_ini", "save_config", "load_config",
           "DiagramConfig", "TopoConfig", "ImageConfig"]
