"""Command-line runner: ``rclocality <command> --config run.yaml``.

A run reads one YAML file (flags and ``--set key.path=value`` override
fields), writes comma-separated tables into ``--out`` and finishes with
``manifest.json``.  The manifest stores the resolved config, so passing it
back as ``--config`` repeats the run.  Numeric tables never contain
timestamps or worker counts and are byte-identical across reruns.

Exit codes: 0 success, 2 invalid config, 3 enumeration cap exceeded,
4 inconclusive critical-point scan.  Failures write ``error.json``.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from . import critical, exact, greens, irb, sampler
from .exact import CapacityError, PottsParams, RcParams, couple_params
from .io import corpus_graph, read_edge_list
from .lattice import InvalidSpecError, Lattice, Subgraph, ball, build_lattice
from .observables import (Connect, Magnetization, MeanClusterFraction, TruncatedTwoPoint,
                          TwoPointSpin, Wrapping)
from .stats import merge_results

COMMANDS = ("exact", "sample", "greens", "irb-check", "pc-scan", "locality", "decay")
STOCHASTIC = {"sample", "irb-check", "pc-scan", "locality", "decay"}

EXIT_OK, EXIT_VALIDATION, EXIT_CAPACITY, EXIT_INCONCLUSIVE = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ config

def load_config(path) -> dict:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    if "manifest_version" in data:
        # a manifest: replay its resolved config
        data = data["config"]
    return copy.deepcopy(data)


def set_path(cfg: dict, dotted: str, raw: str):
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"--set {dotted}: {k} is not a section")
    node[keys[-1]] = yaml.safe_load(raw)


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _require(cfg, key, where="config"):
    if key not in cfg:
        raise ConfigError(f"{where}: missing '{key}'")
    return cfg[key]


def _grid(spec):
    if isinstance(spec, dict):
        return [float(x) for x in np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))]
    return [float(x) for x in spec]


def _graph(cfg):
    """``lattice`` (axis records), ``graph`` (edge-list path) or ``corpus`` (name); optional ``ball``."""
    given = [k for k in ("lattice", "graph", "corpus") if k in cfg]
    if len(given) != 1:
        raise ConfigError("give exactly one of 'lattice', 'graph' and 'corpus'")
    if "lattice" in cfg:
        g = build_lattice(cfg["lattice"])
    elif "graph" in cfg:
        g = read_edge_list(cfg["graph"])
    else:
        try:
            g = corpus_graph(cfg["corpus"])
        except KeyError:
            raise ConfigError(f"unknown corpus graph {cfg['corpus']!r}") from None
    if "ball" in cfg:
        b = cfg["ball"]
        g = ball(g, _vertex(g, _require(b, "center", "ball")), int(_require(b, "radius", "ball")))
    return g


def _vertex(g, ref) -> int:
    if isinstance(ref, (list, tuple)):
        if not isinstance(g, Lattice):
            raise ConfigError("coordinates need a lattice")
        return g.index(ref)
    v = int(ref)
    if not 0 <= v < g.num_vertices:
        raise ConfigError(f"vertex {v} out of range")
    return v


def _label(g, v):
    base = g.ambient if isinstance(g, Subgraph) else g
    amb = int(g.vertices[v]) if isinstance(g, Subgraph) else v
    if isinstance(base, Lattice):
        return " ".join(map(str, base.coords(amb)))
    return str(amb)


def _describe(g) -> str:
    if isinstance(g, Subgraph):
        return f"subgraph({g.num_vertices}v,{g.num_edges}e) of {_describe(g.ambient)}"
    if isinstance(g, Lattice):
        return g.spec_string()
    return f"graph({g.num_vertices}v,{g.num_edges}e)"


def _model(cfg, potts: bool):
    """Model section: ``q``, exactly one of ``p``/``beta``, ``bc``, ``b``."""
    m = _require(cfg, "model")
    q = float(_require(m, "q", "model"))
    if "p" in m and "beta" in m:
        raise ConfigError("model: p and beta are mutually exclusive (give one, the other is derived)")
    if "p" not in m and "beta" not in m:
        raise ConfigError("model: give p or beta")
    bc = m.get("bc", exact.FREE)
    integer_q = q == int(q) and q >= 2
    if "beta" in m:
        if not integer_q:
            raise ConfigError("model: beta needs an integer q >= 2")
        beta = float(m["beta"])
        p = couple_params(q, beta=beta)
    else:
        p = float(m["p"])
        beta = couple_params(q, p=p) if integer_q else None
    if potts:
        if not integer_q:
            raise ConfigError("model: Potts runs need an integer q >= 2")
        bc = exact.MONOCHROMATIC if bc == exact.WIRED else bc
        return PottsParams(beta, int(q), bc, int(m.get("b", 0)))
    bc = exact.WIRED if bc == exact.MONOCHROMATIC else bc
    return RcParams(p, q, bc)


def _chain(cfg, seed, index=0):
    c = dict(cfg.get("chain", {}))
    return sampler.ChainConfig(algorithm=c.get("algorithm", sampler.SWENDSEN_WANG),
                               sweeps=int(c.get("sweeps", 10_000)), burn_in=int(c.get("burn_in", 1_000)),
                               seed=int(seed), stride=int(c.get("stride", 1)), chain_index=index)


def _header(lines, cfg, g=None, params=None):
    out = [f"# rclocality {__version__} command={cfg['command']}"]
    if g is not None:
        out.append(f"# lattice={_describe(g)}")
    if params is not None:
        out.append("# params=" + " ".join(f"{k}={v}" for k, v in vars(params).items()))
    if "seed" in cfg:
        out.append(f"# seed={cfg['seed']}")
    return "\n".join(out + lines) + "\n"


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _table(header, rows) -> list:
    return [",".join(header)] + [",".join(_fmt(x) for x in r) for r in rows]


# ------------------------------------------------------------------ commands

def cmd_exact(cfg, out):
    g = _graph(cfg)
    rc = _model(cfg, potts=False)
    max_edges = int(cfg.get("max_edges", exact.MAX_EDGES))
    tab = exact.rc_distribution(g, rc, max_edges=max_edges)
    pairs = cfg.get("pairs")
    if pairs is None:
        pairs = [(x, y) for x in range(g.num_vertices) for y in range(x + 1, g.num_vertices)]
    else:
        pairs = [(_vertex(g, a), _vertex(g, b)) for a, b in pairs]
    spin = None
    if cfg.get("potts", False):
        pp = _model(cfg, potts=True)
        spin = exact.potts_table(g, pp, max_states=int(cfg.get("max_states", exact.MAX_SPIN_STATES)))
    rows = []
    for x, y in pairs:
        row = [_label(g, x), _label(g, y), tab.connection(x, y)]
        if spin is not None:
            row.append(spin.two_point(x, y))
        rows.append(row)
    header = ["x", "y", "connection"] + (["two_point_spin"] if spin is not None else [])
    files = {"exact.csv": _header(_table(header, rows), cfg, g, rc)}
    marg = [[int(e), _label(g, int(u)), _label(g, int(v)), pm]
            for e, ((u, v), pm) in enumerate(zip(g.edges, tab.edge_marginals()))]
    files["edges.csv"] = _header(_table(["edge", "u", "v", "p_open"], marg), cfg, g, rc)
    return files


_OBS = {
    "connect": lambda g, o: Connect(_vertex(g, o["x"]), _vertex(g, o["y"])),
    "two_point_spin": lambda g, o: TwoPointSpin(_vertex(g, o["x"]), _vertex(g, o["y"])),
    "wrapping": lambda g, o: Wrapping(int(o["axis"])),
    "magnetization": lambda g, o: Magnetization(None if o.get("x") is None else _vertex(g, o["x"])),
    "truncated_two_point": lambda g, o: TruncatedTwoPoint(_vertex(g, o["x"]), _vertex(g, o.get("origin", 0))),
    "mean_cluster_fraction": lambda g, o: MeanClusterFraction(),
}


def _observables(g, specs):
    out = []
    for o in specs:
        kind = o.get("kind") if isinstance(o, dict) else o
        if kind not in _OBS:
            raise ConfigError(f"unknown observable kind {kind!r}")
        out.append(_OBS[kind](g, o if isinstance(o, dict) else {}))
    return out


def _obs_label(g, o) -> str:
    """Observable name with vertices written as coordinates."""
    kind = {Connect: "connect", TwoPointSpin: "two_point_spin", Wrapping: "wrapping",
            Magnetization: "magnetization", TruncatedTwoPoint: "truncated_two_point",
            MeanClusterFraction: "mean_cluster_fraction"}[type(o)]
    if isinstance(o, Wrapping):
        return f"{kind}(axis {o.axis})"
    verts = [v for v in (getattr(o, "origin", None), getattr(o, "x", None), getattr(o, "y", None)) if v is not None]
    if not verts:
        return kind
    return f"{kind}(" + ";".join(_label(g, v) for v in verts) + ")"


def _run_chain_job(args):
    g, params, chain, obs = args
    return sampler.run_chain(g, params, chain, obs)


def _map(fn, jobs, workers):
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


def cmd_sample(cfg, out):
    g = _graph(cfg)
    obs = _observables(g, _require(cfg, "observables"))
    # spin observables (and monochromatic bc) need Potts parameters
    potts = any(isinstance(o, (TwoPointSpin, Magnetization)) for o in obs)
    params = _model(cfg, potts=potts)
    n_chains = int(cfg.get("chain", {}).get("chains", 1))
    jobs = [(g, params, _chain(cfg, cfg["seed"], i), obs) for i in range(n_chains)]
    results = _map(_run_chain_job, jobs, cfg.get("workers", 1))
    rows = []
    for k, o in enumerate(obs):
        r = merge_results([res[k] for res in results])
        rows.append([_obs_label(g, o), r.mean, r.stderr, r.tau_int, r.samples])
    header = ["observable", "mean", "stderr", "tau_int", "samples"]
    return {"sample.csv": _header(_table(header, rows), cfg, g, params)}


def _quad(cfg):
    q = cfg.get("quadrature", {})
    return greens.QuadratureSpec(nodes=int(q.get("nodes", 16)), rule=q.get("rule", "bessel"),
                                 levels=int(q.get("levels", 4)), tolerance=float(q.get("tolerance", 1e-10)))


def cmd_greens(cfg, out):
    kind = cfg.get("kind", "torus")
    if kind == "torus":
        lat = build_lattice(_require(cfg, "lattice"))
        if not lat.fully_periodic:
            raise InvalidSpecError("the torus Green function needs periodic axes")
        G = greens.torus_green(lat, method=cfg.get("method", "fft"))
        rows = [[" ".join(map(str, idx)), G.values[idx]] for idx in np.ndindex(*G.sides)]
        lines = [f"# sides={'x'.join(map(str, G.sides))} method={G.method}"] + _table(["delta", "value"], rows)
        return {"greens.csv": _header(lines, cfg)}
    quad = _quad(cfg)
    deltas = cfg.get("deltas", [[0] * int(cfg.get("d", 3))])
    rows = []
    if kind == "zd":
        d = int(_require(cfg, "d"))
        for dl in deltas:
            rows.append([" ".join(map(str, dl)), greens.zd_green(d, dl, quad)])
        desc = f"# Z^{d} rule={quad.rule} tolerance={quad.tolerance:g}"
    elif kind == "slab":
        r = int(_require(cfg, "r"))
        tr = [int(L) for L in _require(cfg, "transverse")]
        for dl in deltas:
            rows.append([" ".join(map(str, dl)), greens.slab_green(r, tr, dl, quad)])
        desc = f"# Z^{r} x torus {'x'.join(map(str, tr))} rule={quad.rule} tolerance={quad.tolerance:g}"
    else:
        raise ConfigError(f"unknown greens kind {kind!r}")
    return {"greens.csv": _header([desc] + _table(["delta", "value"], rows), cfg)}


def cmd_irb(cfg, out):
    lat = build_lattice(_require(cfg, "lattice"))
    irb.check_irb_torus(lat)
    q = int(_require(cfg, "q"))
    betas = _grid(_require(cfg, "betas"))
    n_random = int(cfg.get("random_vectors", 100))
    n_local = int(cfg.get("locality_vectors", 20))
    source = cfg.get("source", "auto")
    max_states = int(cfg.get("max_states", exact.MAX_SPIN_STATES))
    rng = sampler.make_rng(cfg["seed"], 0)
    vectors = [(f"random{i}", irb.random_zero_sum(lat.num_vertices, rng)) for i in range(n_random)]
    for i in range(n_local):
        k = int(rng.integers(1, lat.num_vertices))
        E = np.sort(rng.choice(lat.num_vertices, size=k, replace=False))
        vectors.append((f"locality{i}", irb.make_locality_vector(lat, E)))
    G = greens.torus_green(lat)
    if source == "auto":
        source = irb.EXACT if q ** lat.num_vertices <= max_states else irb.MONTE_CARLO
    records = []
    for j, beta in enumerate(betas):
        params = PottsParams(beta, q)
        if source == irb.EXACT:
            corr = irb.exact_correlations(lat, params, max_states)
        elif source == irb.MONTE_CARLO:
            corr = irb.mc_correlations(lat, params, _chain(cfg, cfg["seed"], 1 + j))
        else:
            raise ConfigError(f"unknown correlation source {source!r}")
        for vid, v in vectors:
            rep = irb.check_infrared_bound(lat, params, v, corr, float(cfg.get("tolerance", 1e-9)), G)
            records.append(irb.IrbRecord(lat.spec_string(), q, beta, vid, rep))
    csv = irb.irb_records_csv(records)
    return {"irb.csv": _header([csv.rstrip("\n")], cfg, lat),
            "irb_summary.txt": irb.irb_summary(records) + "\n"}


def _family(cfg):
    f = _require(cfg, "family")
    return critical.LatticeFamily(int(f["d"]), int(f.get("r", f["d"])), f.get("thickness"),
                                  bool(f.get("open_transverse", False)))


def cmd_pc_scan(cfg, out):
    fam = _family(cfg)
    sizes = [int(N) for N in _require(cfg, "sizes")]
    q = float(_require(cfg, "q"))
    chain = _chain(cfg, cfg["seed"])
    workers = int(cfg.get("workers", 1))
    if "p_grid" in cfg and "beta_grid" in cfg:
        raise ConfigError("p_grid and beta_grid are mutually exclusive")
    if "beta_grid" in cfg:
        est = critical.scan_pc(fam, sizes, q, beta_grid=_grid(cfg["beta_grid"]), chain=chain, workers=workers)
    elif cfg.get("refine", False):
        est = critical.refine_scan(fam, sizes, q, _grid(_require(cfg, "p_grid")), chain,
                                   int(cfg.get("fine_points", 9)), workers)
    else:
        est = critical.scan_pc(fam, sizes, q, _grid(_require(cfg, "p_grid")), chain, workers)
    hdr = [f"# family={fam.label()} q={q:g}"]
    return {"curves.csv": _header(hdr + [critical.curves_csv(est).rstrip("\n")], cfg),
            "summary.csv": _header(hdr + [critical.summary_csv(est).rstrip("\n")], cfg)}


def cmd_locality(cfg, out):
    d, r = int(_require(cfg, "d")), int(_require(cfg, "r"))
    q = float(_require(cfg, "q"))
    rows = critical.locality_table(d, r, q, [int(n) for n in _require(cfg, "thicknesses")],
                                   [int(N) for N in _require(cfg, "N_schedule")], _chain(cfg, cfg["seed"]),
                                   _grid(_require(cfg, "p_grid")), int(cfg.get("fine_points", 9)),
                                   int(cfg.get("workers", 1)))
    table = [["full" if row.n is None else row.n, "" if row.n is None else 2 * row.n,
              row.p_c_hat, row.ci, " ".join(map(str, row.N_used))] for row in rows]
    hdr = [f"# d={d} r={r} q={q:g} (exploratory when r < 3)"]
    files = {"locality.csv": _header(hdr + _table(["n", "thickness", "p_c_hat", "ci", "N_used"], table), cfg)}
    for row in rows:
        tag = "full" if row.n is None else f"n{row.n}"
        files[f"curves_{tag}.csv"] = _header(hdr + [critical.curves_csv(row.estimate).rstrip("\n")], cfg)
    return files


def cmd_decay(cfg, out):
    if "input" in cfg:
        data = np.loadtxt(cfg["input"], delimiter=",", comments="#", ndmin=2, skiprows=int(cfg.get("skiprows", 0)))
        x, y = data[:, 0], data[:, 1]
        s = data[:, 2] if data.shape[1] > 2 else None
        src = [f"# input={cfg['input']}"]
        g = params = None
    else:
        g = _graph(cfg)
        if not isinstance(g, Lattice):
            raise ConfigError("decay runs need a lattice")
        params = _model(cfg, potts=False)
        axis = int(cfg.get("axis", 0))
        dists = [int(t) for t in _require(cfg, "distances")]
        origin = 0
        obs = []
        for t in dists:
            c = [0] * g.dim
            c[axis] = t
            obs.append(TruncatedTwoPoint(g.index(c), origin))
        res = sampler.run_chain(g, params, _chain(cfg, cfg["seed"]), obs)
        x = np.array(dists, dtype=float)
        y = np.array([r.mean for r in res])
        s = np.array([r.stderr for r in res])
        src = [f"# axis={axis}"]
    keep = y > 0
    fit = critical.decay_fit(x[keep], y[keep], None if s is None else s[keep])
    rows = [[xi, yi, None if s is None else si] for xi, yi, si in zip(x, y, s if s is not None else [None] * len(x))]
    data_lines = _table(["distance", "value", "stderr"], rows)
    fit_lines = _table(["rate", "rate_ci", "intercept", "chi2_red", "decaying"],
                       [[fit.rate, fit.rate_ci, fit.intercept, fit.chi2_red, int(fit.decaying)]])
    return {"decay.csv": _header(src + data_lines, cfg, g, params),
            "decay_fit.csv": _header(src + fit_lines, cfg, g, params)}


HANDLERS = {"exact": cmd_exact, "sample": cmd_sample, "greens": cmd_greens, "irb-check": cmd_irb,
            "pc-scan": cmd_pc_scan, "locality": cmd_locality, "decay": cmd_decay}


# ------------------------------------------------------------------ driver

def _write(out: Path, name: str, text: str) -> str:
    path = out / name
    path.write_text(text)
    return hashlib.sha256(text.encode()).hexdigest()


def _fail(out: Path | None, code: int, kind: str, message: str, **extra) -> int:
    rec = {"error": kind, "message": message, "exit_code": code, **extra}
    text = json.dumps(rec, sort_keys=True)
    print(text, file=sys.stderr)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").write_text(text + "\n")
        except OSError:
            pass
    return code


def resolve(args) -> dict:
    cfg = load_config(args.config) if args.config else {}
    if args.command is not None:
        if cfg.get("command", args.command) != args.command:
            raise ConfigError(f"config is for '{cfg['command']}' but '{args.command}' was requested")
        cfg["command"] = args.command
    if cfg.get("command") not in COMMANDS:
        raise ConfigError(f"command must be one of {', '.join(COMMANDS)}")
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        set_path(cfg, k, v)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.workers is not None:
        cfg["workers"] = args.workers
    if cfg["command"] in STOCHASTIC and not (cfg["command"] == "decay" and "input" in cfg):
        if "seed" not in cfg:
            raise ConfigError(f"'{cfg['command']}' is stochastic and needs a seed")
        seed = cfg["seed"]
        if not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
    return cfg


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rclocality", description="Random-cluster / Potts numerics.")
    ap.add_argument("command", nargs="?", choices=COMMANDS)
    ap.add_argument("--config", help="YAML config (or a manifest.json from an earlier run)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--out", default="out")
    ap.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        cfg = resolve(args)
        workers = int(cfg.get("workers", 1))
        if workers < 1:
            raise ConfigError("workers must be >= 1")
        files = HANDLERS[cfg["command"]](cfg, out)
    except (ConfigError, InvalidSpecError, sampler.UnsupportedAlgorithmError) as exc:
        return _fail(out, EXIT_VALIDATION, "validation", str(exc))
    except CapacityError as exc:
        return _fail(out, EXIT_CAPACITY, "capacity", str(exc), cap=exc.cap)
    except critical.InconclusiveScanError as exc:
        if exc.curves:
            est = critical.PcEstimate(float("nan"), float("nan"), critical.WRAPPING_CROSSING,
                                      sorted(exc.curves), 0.0, [], exc.curves)
            out.mkdir(parents=True, exist_ok=True)
            _write(out, "curves.csv", critical.curves_csv(est))
        return _fail(out, EXIT_INCONCLUSIVE, "inconclusive", str(exc))
    except (ValueError, KeyError, TypeError, IndexError, OSError, yaml.YAMLError) as exc:
        return _fail(out, EXIT_VALIDATION, "validation", f"{type(exc).__name__}: {exc}")
    out.mkdir(parents=True, exist_ok=True)
    stale = out / "error.json"
    if stale.exists():
        stale.unlink()
    hashes = {name: _write(out, name, text) for name, text in sorted(files.items())}
    # workers never changes results, so it is left out of the hash
    hashed = {k: v for k, v in cfg.items() if k != "workers"}
    manifest = {"manifest_version": 1, "tool": "rclocality", "version": __version__,
                "command": cfg["command"], "seed": cfg.get("seed"), "config_hash": config_hash(hashed),
                "config": cfg, "outputs": hashes}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
