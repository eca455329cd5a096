"""Declarative YAML run configuration.

One file drives a whole run: the model, the grid, the Monte Carlo budget,
which experiments to execute, and where artifacts go. The schema (all keys
below ``model.kind`` specific ones optional unless noted):

.. code-block:: yaml

    model:
      kind: atlas            # atlas | rank_based | brownian
      n: 5
      g: 0.1                 # atlas
      sigma: 0.2             # atlas, brownian
      g_by_rank: [...]       # rank_based, length n
      sigma_by_rank: [...]   # rank_based, length n (all > 0)
      initial_log: [...]     # optional, default all zeros
    grid:
      T: 1.0
      M: 4096
    monte_carlo:
      paths: 100
      master_seed: 42
    experiments: [simulate, verify_prop1, ...]
    portfolio:               # used by verify_prop3
      generator: entropy     # constant | entropy | diversity | geometric_mean
      p: 0.5                 # diversity exponent
    convergence:
      levels: [256, 1024, 4096]   # step counts, coarse to fine; default
                                  # [M/16, M/4, M] when M is divisible by 16
      claim: lemma2               # claim run by the 'convergence' experiment
    coincidence:
      delta: sqrt_h          # near-tie band width; sqrt_h or a number
    output_dir: out

Validation errors carry the dotted key path of the offending entry; YAML
syntax errors keep the parser's line/column marks.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .errors import ValidationError
from .models import AtlasParams, BrownianParams, RankBasedParams
from .paths import RngSpec, TimeGrid, build_grid
from .portfolios import GeneratingFunction
from .verify import CLAIMS

__all__ = ["RunConfig", "EXPERIMENTS", "load_config", "parse_config"]

EXPERIMENTS = (
    "simulate",
    "verify_lemma2",
    "verify_lemma3",
    "verify_lemma4",
    "verify_prop1",
    "verify_prop3",
    "convergence",
    "coincidence",
    "remark_probe",
)

_GENERATORS = ("constant", "entropy", "diversity", "geometric_mean")


@dataclass(frozen=True)
class RunConfig:
    """Fully validated run description plus its normalized echo."""

    model: AtlasParams | RankBasedParams | BrownianParams
    model_kind: str
    grid: TimeGrid
    paths: int
    rng: RngSpec
    experiments: tuple[str, ...]
    generator: GeneratingFunction
    levels: tuple[int, ...]
    convergence_claim: str | None
    band_delta: float | None  # None means the sqrt(h) rule
    output_dir: Path
    echo: dict


def _fail(path: str, message: str):
    raise ValidationError(f"config key '{path}': {message}")


def _section(raw: dict, key: str, required: bool = True) -> dict:
    value = raw.get(key)
    if value is None:
        if required:
            _fail(key, "required section is missing")
        return {}
    if not isinstance(value, dict):
        _fail(key, f"expected a mapping, got {type(value).__name__}")
    return value


def _number(section: dict, path: str, key: str, required: bool = True, default=None):
    if key not in section:
        if required:
            _fail(f"{path}.{key}", "required value is missing")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(f"{path}.{key}", f"expected a number, got {value!r}")
    return value


def _integer(section: dict, path: str, key: str, required: bool = True, default=None):
    value = _number(section, path, key, required, default)
    if value is None:
        return None
    if int(value) != value:
        _fail(f"{path}.{key}", f"expected an integer, got {value!r}")
    return int(value)


def _vector(section: dict, path: str, key: str, n: int | None):
    value = section.get(key)
    if value is None:
        return None
    if not isinstance(value, (list, tuple)) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        _fail(f"{path}.{key}", "expected a list of numbers")
    if n is not None and len(value) != n:
        _fail(f"{path}.{key}", f"expected length {n}, got {len(value)}")
    return np.asarray(value, dtype=np.float64)


def _parse_model(raw: dict):
    section = _section(raw, "model")
    kind = section.get("kind")
    if kind not in ("atlas", "rank_based", "brownian"):
        _fail("model.kind", f"expected atlas, rank_based, or brownian, got {kind!r}")
    n = _integer(section, "model", "n")
    initial = _vector(section, "model", "initial_log", n)
    try:
        if kind == "atlas":
            model = AtlasParams(
                n=n,
                g=_number(section, "model", "g"),
                sigma=_number(section, "model", "sigma"),
                initial_log=initial,
            )
        elif kind == "brownian":
            model = BrownianParams(
                n=n,
                sigma=_number(section, "model", "sigma", required=False, default=1.0),
                initial_log=initial,
            )
        else:
            g_tab = _vector(section, "model", "g_by_rank", n)
            s_tab = _vector(section, "model", "sigma_by_rank", n)
            if g_tab is None:
                _fail("model.g_by_rank", "required for rank_based models")
            if s_tab is None:
                _fail("model.sigma_by_rank", "required for rank_based models")
            model = RankBasedParams(n=n, g_by_rank=g_tab, sigma_by_rank=s_tab, initial_log=initial)
    except ValidationError as exc:
        if "config key" in str(exc):
            raise
        _fail("model", str(exc))
    return kind, model


def _default_levels(M: int) -> tuple[int, ...] | None:
    if M % 16 == 0 and M // 16 >= 2:
        return (M // 16, M // 4, M)
    return None


def parse_config(raw: dict) -> RunConfig:
    """Validate a parsed mapping and resolve every default."""
    if not isinstance(raw, dict):
        raise ValidationError(f"config root must be a mapping, got {type(raw).__name__}")
    known = {
        "model", "grid", "monte_carlo", "experiments",
        "portfolio", "convergence", "coincidence", "output_dir",
    }
    for key in raw:
        if key not in known:
            _fail(key, f"unknown section; expected one of {sorted(known)}")

    kind, model = _parse_model(raw)

    grid_sec = _section(raw, "grid")
    try:
        grid = build_grid(_number(grid_sec, "grid", "T"), _integer(grid_sec, "grid", "M"))
    except ValidationError as exc:
        if "config key" in str(exc):
            raise
        _fail("grid", str(exc))

    mc = _section(raw, "monte_carlo")
    paths = _integer(mc, "monte_carlo", "paths")
    if paths < 1:
        _fail("monte_carlo.paths", f"must be >= 1, got {paths}")
    try:
        rng = RngSpec(master_seed=_integer(mc, "monte_carlo", "master_seed"))
    except ValidationError as exc:
        _fail("monte_carlo.master_seed", str(exc))

    experiments = raw.get("experiments")
    if not isinstance(experiments, list) or not experiments:
        _fail("experiments", "expected a non-empty list of experiment names")
    for name in experiments:
        if name not in EXPERIMENTS:
            _fail("experiments", f"unknown experiment {name!r}; choose from {list(EXPERIMENTS)}")
    if "remark_probe" in experiments and kind != "rank_based":
        _fail("experiments", "remark_probe requires model.kind = rank_based")
    pair_claims = {"verify_lemma3", "verify_lemma4", "verify_prop1", "verify_prop3",
                   "coincidence", "remark_probe"}
    if model.n < 2 and pair_claims.intersection(experiments):
        _fail("model.n", "experiments comparing assets need n >= 2")

    port = _section(raw, "portfolio", required=False)
    gen_name = port.get("generator", "entropy")
    if gen_name not in _GENERATORS:
        _fail("portfolio.generator", f"expected one of {list(_GENERATORS)}, got {gen_name!r}")
    gen_params = {}
    if gen_name == "diversity":
        gen_params["p"] = _number(port, "portfolio", "p")
    elif gen_name == "constant" and "c" in port:
        gen_params["c"] = _number(port, "portfolio", "c", required=False, default=1.0)
    try:
        generator = GeneratingFunction.by_name(gen_name, **gen_params)
    except ValidationError as exc:
        _fail("portfolio", str(exc))

    conv = _section(raw, "convergence", required=False)
    if "levels" in conv:
        levels_raw = conv["levels"]
        if not isinstance(levels_raw, list) or len(levels_raw) < 3:
            _fail("convergence.levels", "expected a list of at least 3 step counts")
        levels = []
        for v in levels_raw:
            if isinstance(v, bool) or not isinstance(v, int):
                _fail("convergence.levels", f"step counts must be integers, got {v!r}")
            levels.append(v)
        levels = tuple(levels)
    else:
        levels = _default_levels(grid.M)
    needs_levels = {"verify_lemma2", "verify_lemma3", "verify_lemma4",
                    "verify_prop1", "verify_prop3", "convergence", "coincidence"}
    if levels is None and needs_levels.intersection(experiments):
        _fail(
            "convergence.levels",
            f"no default ladder for M={grid.M} (not divisible by 16 with M/16 >= 2); "
            "specify levels explicitly",
        )
    if levels is not None:
        if sorted(levels) != list(levels) or len(set(levels)) != len(levels):
            _fail("convergence.levels", f"levels must be strictly increasing, got {list(levels)}")
        for m in levels:
            if m < 2 or levels[-1] % m != 0:
                _fail(
                    "convergence.levels",
                    f"every level must be >= 2 and divide the finest ({levels[-1]}); got {m}",
                )
    claim = conv.get("claim")
    if claim is not None and claim not in CLAIMS:
        _fail("convergence.claim", f"expected one of {list(CLAIMS)}, got {claim!r}")
    if "convergence" in experiments and claim is None:
        _fail("convergence.claim", "required when the 'convergence' experiment is requested")

    coin = _section(raw, "coincidence", required=False)
    band_delta = None
    if "delta" in coin:
        delta = coin["delta"]
        if delta == "sqrt_h":
            band_delta = None
        elif isinstance(delta, (int, float)) and not isinstance(delta, bool) and delta > 0:
            band_delta = float(delta)
        else:
            _fail("coincidence.delta", f"expected 'sqrt_h' or a positive number, got {delta!r}")

    out_dir = raw.get("output_dir", "out")
    if not isinstance(out_dir, str) or not out_dir:
        _fail("output_dir", f"expected a non-empty string, got {out_dir!r}")

    echo = {
        "model": {"kind": kind, "n": model.n, "initial_log": model.initial_log.tolist()},
        "grid": {"T": grid.T, "M": grid.M},
        "monte_carlo": {"paths": paths, "master_seed": rng.master_seed},
        "experiments": list(experiments),
        "portfolio": {"generator": gen_name, **gen_params},
        "convergence": {
            **({"levels": list(levels)} if levels is not None else {}),
            **({"claim": claim} if claim is not None else {}),
        },
        "coincidence": {"delta": "sqrt_h" if band_delta is None else band_delta},
        "output_dir": out_dir,
    }
    if kind == "atlas":
        echo["model"].update(g=model.g, sigma=model.sigma)
    elif kind == "brownian":
        echo["model"].update(sigma=model.sigma)
    else:
        echo["model"].update(
            g_by_rank=model.g_by_rank.tolist(), sigma_by_rank=model.sigma_by_rank.tolist()
        )

    return RunConfig(
        model=model,
        model_kind=kind,
        grid=grid,
        paths=paths,
        rng=rng,
        experiments=tuple(experiments),
        generator=generator,
        levels=levels if levels is not None else tuple(),
        convergence_claim=claim,
        band_delta=band_delta,
        output_dir=Path(out_dir),
        echo=echo,
    )


def load_config(path: str | Path) -> RunConfig:
    """Read, parse, and validate a YAML config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError(f"config {path} is not valid YAML: {exc}") from exc
    return parse_config(raw)
