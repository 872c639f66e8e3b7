"""Experiment configuration: a TOML file plus an s-expression kernel grammar.

Kernel expressions::

    (const c) (sobolev [lo hi]) (grid N [lo hi]) (linear) (linear-x)
    (laplace [scale]) (laplace-x [scale]) (gaussian [gamma]) (gaussian-p [gamma])
    (poly d) (poly-p d) (lowdeg d [n]) (pair-groups N) (embeddedness N)
    (isomorphism N [max-nodes]) (pair-groups-x) (embeddedness-x) (isomorphism-x [max-nodes])
    (sum k ...) (product k ...) (scale c k)

Graph kernels take their groups from the run's graph settings.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import graphs
from .kernels import (
    ConstantKernel,
    GaussianKernel,
    GridKernel,
    Kernel,
    LaplaceKernel,
    LinearKernel,
    LowDegreeBooleanKernel,
    PolynomialKernel,
    ProductKernel,
    ScaledKernel,
    SobolevKernel,
    SumKernel,
)

MODES = ("binary", "quantile", "vector", "linkpred", "omni", "batch")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# s-expressions


def tokenize(text: str) -> list:
    return text.replace("(", " ( ").replace(")", " ) ").split()


def parse_sexpr(text: str):
    tokens = tokenize(text)
    if not tokens:
        raise ConfigError("empty kernel expression")

    def read(pos):
        tok = tokens[pos]
        if tok == "(":
            items = []
            pos += 1
            while pos < len(tokens) and tokens[pos] != ")":
                item, pos = read(pos)
                items.append(item)
            if pos >= len(tokens):
                raise ConfigError(f"unbalanced parentheses in kernel expression {text!r}")
            return items, pos + 1
        if tok == ")":
            raise ConfigError(f"unexpected ')' in kernel expression {text!r}")
        return tok, pos + 1

    tree, end = read(0)
    if end != len(tokens):
        raise ConfigError(f"trailing tokens in kernel expression {text!r}")
    return tree


def _num(tok, cast=float, what="number"):
    if isinstance(tok, list):
        raise ConfigError(f"expected a {what}, got a sub-expression")
    try:
        return cast(tok)
    except ValueError:
        raise ConfigError(f"expected a {what}, got {tok!r}") from None


def _argc(name, args, lo, hi):
    if not lo <= len(args) <= hi:
        raise ConfigError(f"({name} ...) takes {lo}..{hi} arguments, got {len(args)}")


@dataclass
class KernelContext:
    groups: Any = None  # GroupFamily for graph kernels


def build_kernel(expr, context: KernelContext | None = None) -> Kernel:
    context = context or KernelContext()
    tree = parse_sexpr(expr) if isinstance(expr, str) else expr
    if not isinstance(tree, list) or not tree:
        raise ConfigError(f"kernel expression must be a parenthesized form, got {tree!r}")
    head, args = tree[0], tree[1:]
    if isinstance(head, list):
        raise ConfigError("kernel form must start with a name")

    def sub(items):
        return [build_kernel(a, context) for a in items]

    def need_groups():
        if context.groups is None:
            raise ConfigError(f"({head}) needs graph groups; set [graph] in the config")
        return context.groups

    if head == "const":
        _argc(head, args, 0, 1)
        return ConstantKernel(_num(args[0]) if args else 1.0)
    if head == "sobolev":
        if len(args) not in (0, 2):
            raise ConfigError("(sobolev) takes no arguments or lo hi")
        return SobolevKernel(*(_num(a) for a in args))
    if head == "grid":
        if len(args) not in (1, 3):
            raise ConfigError("(grid N [lo hi])")
        return GridKernel(_num(args[0], int, "bin count"), *(_num(a) for a in args[1:]))
    if head in ("linear", "linear-x"):
        _argc(head, args, 0, 0)
        return LinearKernel(on="p" if head == "linear" else "x")
    if head in ("laplace", "laplace-x"):
        _argc(head, args, 0, 1)
        return LaplaceKernel(on="p" if head == "laplace" else "x", scale=_num(args[0]) if args else 1.0)
    if head in ("gaussian", "gaussian-p"):
        _argc(head, args, 0, 1)
        return GaussianKernel(on="x" if head == "gaussian" else "p", gamma=_num(args[0]) if args else 1.0)
    if head in ("poly", "poly-p"):
        _argc(head, args, 1, 1)
        return PolynomialKernel(_num(args[0], int, "degree"), on="x" if head == "poly" else "p")
    if head == "lowdeg":
        _argc(head, args, 1, 2)
        n = _num(args[1], int, "dimension") if len(args) > 1 else None
        return LowDegreeBooleanKernel(_num(args[0], int, "degree"), n)
    if head == "pair-groups":
        _argc(head, args, 1, 1)
        return graphs.build_pair_groups_kernel(need_groups(), _num(args[0], int, "bin count"))
    if head == "pair-groups-x":
        _argc(head, args, 0, 0)
        return graphs.PairGroupsKernel(need_groups())
    if head == "embeddedness":
        _argc(head, args, 1, 1)
        return graphs.build_embeddedness_kernel(_num(args[0], int, "bin count"))
    if head == "embeddedness-x":
        _argc(head, args, 0, 0)
        return graphs.EmbeddednessKernel()
    if head == "isomorphism":
        _argc(head, args, 1, 2)
        limit = _num(args[1], int, "node limit") if len(args) > 1 else 10
        return graphs.build_isomorphism_kernel(_num(args[0], int, "bin count"), limit)
    if head == "isomorphism-x":
        _argc(head, args, 0, 1)
        return graphs.IsomorphismClassKernel(_num(args[0], int, "node limit") if args else 10)
    if head == "sum":
        return SumKernel(sub(args))
    if head == "product":
        if not args:
            raise ConfigError("(product) needs at least one kernel")
        return ProductKernel(sub(args))
    if head == "scale":
        _argc(head, args, 2, 2)
        return ScaledKernel(_num(args[0]), build_kernel(args[1], context))
    raise ConfigError(f"unknown kernel {head!r}")


# ---------------------------------------------------------------------------
# TOML


TOP_KEYS = {"mode", "T", "seed", "out_dir", "kernel", "name", "nature", "quantile", "vector",
            "graph", "omni", "batch", "eval"}
TABLE_KEYS = {
    "nature": {"kind", "theta", "weights", "bias", "boolean", "interaction", "a", "b", "family",
               "lo", "hi", "mean", "slope", "sd", "components", "noise", "eta", "cell_weights"},
    "quantile": {"q", "y_min", "y_max"},
    "vector": {"lower", "upper", "matrix", "max_iter"},
    "graph": {"levels", "initial_nodes", "initial_edges", "arrival", "base", "homophily",
              "closure", "attachment", "n_bins"},
    "omni": {"losses", "comparators", "comparator_names", "delta"},
    "batch": {"n", "radius", "dim", "noise"},
    "eval": {"probe_x", "probe_p", "n_bins"},
}
REQUIRED = {"mode", "T"}


@dataclass
class ExperimentConfig:
    mode: str
    T: int
    seed: int = 0
    out_dir: str | None = None
    kernel: str = "(const 1)"
    name: str = ""
    tables: dict = field(default_factory=dict)

    def table(self, name: str) -> dict:
        return dict(self.tables.get(name, {}))

    def as_dict(self) -> dict:
        out = {"mode": self.mode, "T": self.T, "seed": self.seed, "kernel": self.kernel}
        if self.name:
            out["name"] = self.name
        if self.out_dir is not None:
            out["out_dir"] = self.out_dir
        out.update({k: dict(v) for k, v in self.tables.items()})
        return out


def config_from_dict(data: dict, source: str = "<config>") -> ExperimentConfig:
    for key in data:
        if key not in TOP_KEYS:
            raise ConfigError(f"{source}: unknown key {key!r}")
    for key in REQUIRED:
        if key not in data:
            raise ConfigError(f"{source}: missing required key {key!r}")
    tables = {}
    for name, allowed in TABLE_KEYS.items():
        if name in data:
            if not isinstance(data[name], dict):
                raise ConfigError(f"{source}: {name!r} must be a table")
            for key in data[name]:
                if key not in allowed:
                    raise ConfigError(f"{source}: unknown key {name}.{key}")
            tables[name] = dict(data[name])
    mode = data["mode"]
    if mode not in MODES:
        raise ConfigError(f"{source}: mode must be one of {', '.join(MODES)}, got {mode!r}")
    try:
        T = int(data["T"])
        seed = int(data.get("seed", 0))
    except (TypeError, ValueError):
        raise ConfigError(f"{source}: 'T' and 'seed' must be integers") from None
    if T < 1:
        raise ConfigError(f"{source}: 'T' must be positive")
    kernel = data.get("kernel", "(const 1)")
    if not isinstance(kernel, str):
        raise ConfigError(f"{source}: 'kernel' must be a string expression")
    parse_sexpr(kernel)
    return ExperimentConfig(mode=mode, T=T, seed=seed, out_dir=data.get("out_dir"), kernel=kernel,
                            name=str(data.get("name", "")), tables=tables)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return config_from_dict(data, str(path))


def loads_config(text: str) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(exc)) from None
    return config_from_dict(data)
