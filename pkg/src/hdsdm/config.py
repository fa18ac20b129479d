"""Run configuration: declarative JSON description of data, model and run.

The config is a single JSON document (machine round-trippable, no comments)
with five sections: ``data`` (file path and column names), ``supports``
(declared covariate supports; these define the standardization
distributions, not the data), ``model`` (effects and priors), ``mcmc``
(sampler settings) and ``split`` (train/test year threshold). See the README
for the full schema.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .distributions import PointCloud, UniformInterval, UniformLevels
from .exceptions import ValidationError
from .mcmc import McmcSettings
from .model import Dataset, EffectDecl, ModelSpec
from .priors import PriorSpec
from .tree import build_default_tree

__all__ = ["RunConfig", "ingest", "build_model", "build_settings", "read_point_cloud"]


@dataclass(frozen=True)
class RunConfig:
    data: dict
    supports: dict
    model: dict
    mcmc: dict = field(default_factory=dict)
    split: dict = field(default_factory=dict)
    output: str = "out"

    def __post_init__(self):
        for key in ("path", "response"):
            if key not in self.data:
                raise ValidationError(f"config data section is missing {key!r}")
        if "effects" not in self.model:
            raise ValidationError("config model section is missing 'effects'")
        if "priors" not in self.model:
            raise ValidationError("config model section is missing 'priors'")
        for eff in self.model["effects"]:
            for key in ("id", "kind"):
                if key not in eff:
                    raise ValidationError(f"effect entry missing {key!r}: {eff}")
            support_key = eff.get("support", eff.get("covariate"))
            if eff["kind"] != "spatial2d" and support_key not in self.supports:
                raise ValidationError(
                    f"effect {eff['id']!r}: no support declared for {support_key!r}"
                )
            if eff["kind"] == "spatial2d" and eff.get("support", "spatial") not in self.supports:
                raise ValidationError(
                    f"effect {eff['id']!r}: no point-cloud support declared"
                )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {"data", "supports", "model", "mcmc", "split", "output"}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown config sections: {sorted(unknown)}")
        return cls(**d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def read_point_cloud(path) -> np.ndarray:
    """Two-column delimited file of planar points; a header row is allowed."""
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if i == 1:
                    continue  # header
                raise ValidationError(f"{path}: unparseable point on line {i}: {row}")
    if not rows:
        raise ValidationError(f"{path}: no points found")
    return np.asarray(rows)


def _build_dist(name: str, spec: dict, base_dir: Path):
    kind = spec.get("kind")
    if kind == "interval":
        return UniformInterval(float(spec["lower"]), float(spec["upper"]))
    if kind == "levels":
        return UniformLevels(int(spec["n"]))
    if kind == "point_cloud":
        return PointCloud(read_point_cloud(base_dir / spec["path"]))
    raise ValidationError(f"support {name!r}: unknown kind {kind!r}")


def build_model(cfg: RunConfig, base_dir=".") -> ModelSpec:
    """Materialize the declared effects and priors into a ModelSpec.

    Priors are keyed by tree-node name; the key ``flex_splits`` provides a
    default for every level-4 ``*_flex`` split.
    """
    base_dir = Path(base_dir)
    dists = {name: _build_dist(name, s, base_dir) for name, s in cfg.supports.items()}

    effects = []
    for eff in cfg.model["effects"]:
        kind = eff["kind"]
        if kind == "spatial2d":
            cov = tuple(eff["covariates"])
            dist = dists[eff.get("support", "spatial")]
            nb = eff.get("n_basis", [8, 8])
            effects.append(
                EffectDecl(
                    effect_id=eff["id"],
                    kind=kind,
                    covariate=cov,
                    dist=dist,
                    side=eff.get("side", "biotic"),
                    role=eff.get("role", "main"),
                    group=eff.get("group", "spatial"),
                    n_basis_2d=(int(nb[0]), int(nb[1])),
                )
            )
        else:
            cov = eff["covariate"]
            effects.append(
                EffectDecl(
                    effect_id=eff["id"],
                    kind=kind,
                    covariate=cov,
                    dist=dists[eff.get("support", cov)],
                    side=eff.get("side", "abiotic"),
                    role=eff.get("role", "main"),
                    group=eff.get("group"),
                    n_basis=int(eff.get("n_basis", 20)),
                )
            )

    labels = [lab for e in effects for lab in e.labels()]
    tree = build_default_tree(labels) if labels else None
    declared = dict(cfg.model["priors"])
    flex_default = declared.pop("flex_splits", None)
    priors: dict[str, PriorSpec] = {}
    node_names = ["total_variance"] + ([s.name for s in tree.splits] if tree else [])
    for node in node_names:
        entry = declared.get(node)
        if entry is None and "_flex" in node:
            entry = flex_default
        if entry is None:
            raise ValidationError(f"no prior declared for tree node {node!r}")
        params = {k: v for k, v in entry.items() if k != "family"}
        priors[node] = PriorSpec(node, entry["family"], params)
    unknown = set(declared) - set(node_names)
    if unknown:
        raise ValidationError(f"priors declared for unknown tree nodes: {sorted(unknown)}")

    return ModelSpec(
        effects=effects,
        priors=priors,
        intercept=bool(cfg.model.get("intercept", True)),
    )


def build_settings(cfg: RunConfig, seed_override: int | None = None) -> McmcSettings:
    m = dict(cfg.mcmc)
    if seed_override is not None:
        m["seed"] = int(seed_override)
    allowed = {
        "chains",
        "iterations",
        "burn_in",
        "thinning",
        "adaptation_window",
        "target_accept_hyper",
        "target_accept_block",
        "seed",
    }
    unknown = set(m) - allowed
    if unknown:
        raise ValidationError(f"unknown mcmc settings: {sorted(unknown)}")
    return McmcSettings(**m)


def _parse_float(value: str, column: str, line: int) -> float:
    try:
        return float(value)
    except ValueError:
        raise ValidationError(
            f"line {line}: cannot parse {column}={value!r} as a number"
        ) from None


def ingest(path, cfg: RunConfig, base_dir=".") -> Dataset:
    """Parse the delimited data file, validate, and tag train/test rows.

    The response must be binary 0/1; rows are reported by file line number
    on any parse or validation failure. Level-coded supports may declare an
    integer ``offset`` subtracted from the raw column (e.g. ``year`` 2000..
    2019 with offset 1999 becomes levels 1..20); the train/test split always
    tests the raw year against ``split.train_max_year``.
    """
    path = Path(base_dir) / path
    response = cfg.data["response"]
    needed = set()
    for eff in cfg.model["effects"]:
        if eff["kind"] == "spatial2d":
            needed.update(eff["covariates"])
        else:
            needed.add(eff["covariate"])
    year_col = cfg.data.get("year")
    if year_col:
        needed.add(year_col)

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = ({response} | needed) - set(header)
        if missing:
            raise ValidationError(f"{path}: missing columns {sorted(missing)}")
        y = []
        columns: dict[str, list[float]] = {c: [] for c in needed}
        for line, row in enumerate(reader, start=2):
            raw = row[response]
            if raw not in ("0", "1"):
                raise ValidationError(
                    f"line {line}: response {response}={raw!r} is not binary 0/1"
                )
            y.append(int(raw))
            for c in needed:
                columns[c].append(_parse_float(row[c], c, line))

    if not y:
        raise ValidationError(f"{path}: no data rows")
    cols = {c: np.asarray(v) for c, v in columns.items()}

    threshold = cfg.split.get("train_max_year")
    if year_col and threshold is not None:
        train_mask = cols[year_col] <= float(threshold)
    else:
        train_mask = np.ones(len(y), dtype=bool)

    for name, spec in cfg.supports.items():
        if spec.get("kind") == "levels" and "offset" in spec and name in cols:
            cols[name] = cols[name] - float(spec["offset"])

    return Dataset(y=np.asarray(y), columns=cols, train_mask=train_mask)
