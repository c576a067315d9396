"""Experiment command line: convergence, wavenumber sweep, stability, selftest.

Every command reads a flat ``key = value`` config (section headers in
square brackets are allowed and ignored), applies CLI overrides, runs the
requested study and writes CSV files.  Output is deterministic: floats
are serialized with ``repr`` and each file ends with a comment block
carrying the config hash and package version, so identical configs
produce byte-identical files.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
import warnings
from dataclasses import dataclass, fields, replace

import numpy as np

from . import __version__, analysis, assembly, mesh as meshmod, regsolve, specialfn, waves

__all__ = [
    "ExperimentConfig",
    "load_config",
    "config_hash",
    "run_convergence",
    "run_ksweep",
    "run_stability",
    "run_selftest",
    "write_csv",
    "main",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """All knobs of the experiment drivers, with desk-scale defaults."""

    kappa: float = 16.0
    domain: tuple = (0.0, 1.0, -0.5, 0.5)   # x0, x1, y0, y1
    mesh_nx: int = 5
    mesh_ny: int = 4
    mesh_jitter: float = 0.25
    mesh_seed: int = 1
    mesh_file: str = ""
    p_list: tuple = (8, 16, 32, 64, 128)
    modes: tuple = (waves.MODE_PPW, waves.MODE_EPW)
    epsilon: float = regsolve.DEFAULT_EPSILON
    oversampling: float = regsolve.DEFAULT_OVERSAMPLING
    sigma: float = 1.0
    source: tuple = ()        # empty -> (-pi/(5 kappa), 0)
    out_dir: str = "results"
    stream_offset: int = 0
    field_resolution: int = 256
    kappa_list: tuple = (8.0, 16.0, 32.0)
    m_list: tuple = (8, 16, 32)
    probe_p_list: tuple = (64, 128, 192, 256, 384, 512)

    def __post_init__(self):
        if self.kappa <= 0 or self.epsilon <= 0 or self.epsilon >= 1:
            raise ValueError("kappa must be positive and epsilon in (0, 1)")
        if self.oversampling < 1.0 or self.sigma <= 0:
            raise ValueError("oversampling must be >= 1 and sigma positive")
        if self.mesh_nx < 1 or self.mesh_ny < 1 or not 0 <= self.mesh_jitter < 0.5:
            raise ValueError("bad mesh parameters")
        if any(p < 1 for p in self.p_list) or any(p < 1 for p in self.probe_p_list):
            raise ValueError("wave budgets must be >= 1")
        if any(k <= 0 for k in self.kappa_list) or any(m < 0 for m in self.m_list):
            raise ValueError("kappa_list entries must be positive, m_list >= 0")
        if self.field_resolution < 2:
            raise ValueError("field resolution must be >= 2")
        x0, x1, y0, y1 = self.domain
        if x1 <= x0 or y1 <= y0:
            raise ValueError("degenerate domain rectangle")
        if any(m not in (waves.MODE_PPW, waves.MODE_EPW) for m in self.modes):
            raise ValueError("modes must be PPW or EPW")

    def source_point(self, kappa: float) -> np.ndarray:
        if self.source:
            return np.asarray(self.source, dtype=float)
        return np.array([-math.pi / (5.0 * kappa), 0.0])

    def build_mesh(self) -> meshmod.Mesh:
        if self.mesh_file:
            return meshmod.load_mesh(self.mesh_file)
        x0, x1, y0, y1 = self.domain
        return meshmod.build_rect_mesh((x0, y0), (x1, y1), self.mesh_nx,
                                       self.mesh_ny, jitter=self.mesh_jitter,
                                       seed=self.mesh_seed)


FULL_SCALE = dict(kappa=128.0, p_list=(64, 128, 256, 512, 815),
                  kappa_list=(16.0, 32.0, 64.0, 128.0))

_TUPLE_FIELDS = {
    "domain": float, "p_list": int, "modes": str, "source": float,
    "kappa_list": float, "m_list": int, "probe_p_list": int,
}
_SCALAR_FIELDS = {
    "kappa": float, "mesh_nx": int, "mesh_ny": int, "mesh_jitter": float,
    "mesh_seed": int, "mesh_file": str, "epsilon": float,
    "oversampling": float, "sigma": float, "out_dir": str,
    "stream_offset": int, "field_resolution": int,
}


def _parse_value(key: str, raw: str):
    if key in _TUPLE_FIELDS:
        conv = _TUPLE_FIELDS[key]
        items = [t for t in raw.replace(",", " ").split() if t]
        return tuple(conv(t) for t in items)
    if key in _SCALAR_FIELDS:
        return _SCALAR_FIELDS[key](raw)
    raise KeyError(f"unknown config key {key!r}")


def load_config(path=None, overrides=None) -> ExperimentConfig:
    """Build a config from an optional file plus a dict of overrides."""
    values = {}
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line or (line.startswith("[") and line.endswith("]")):
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected 'key = value'")
                key, raw = (t.strip() for t in line.split("=", 1))
                values[key] = _parse_value(key, raw)
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    return ExperimentConfig(**values)


def config_hash(config: ExperimentConfig) -> str:
    """Short stable hash of the experiment-relevant configuration.

    The output directory is excluded: it does not influence any computed
    number, so runs of one config into different directories still yield
    byte-identical files.
    """
    parts = []
    for f in sorted(fields(config), key=lambda f: f.name):
        if f.name == "out_dir":
            continue
        parts.append(f"{f.name}={getattr(config, f.name)!r}")
    digest = hashlib.sha256("\n".join(parts).encode("utf-8")).hexdigest()
    return digest[:16]


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(float(value))
    return str(value)


def write_csv(path, header: list[str], rows: list[list], config: ExperimentConfig):
    """Write rows atomically with a trailing metadata comment block."""
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError("row length does not match header")
        lines.append(",".join(_fmt(v) for v in row))
    lines.append(f"# config-hash={config_hash(config)}, version={__version__}")
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def _solve_once(mesh, config: ExperimentConfig, kappa: float, P: int, mode: str):
    """Assemble and solve one (mode, P) study; returns (report, bases, status)."""
    s = config.source_point(kappa)
    ref = analysis.reference_point_source(s, kappa)
    g = assembly.manufacture_g(ref, config.sigma, kappa)
    bases = waves.build_element_bases(mesh, P, kappa, mode,
                                      oversampling=config.oversampling,
                                      stream_offset=config.stream_offset)
    D = assembly.assemble_D(mesh, bases, config.sigma)
    C = assembly.assemble_C(mesh, bases, config.sigma)
    b = assembly.assemble_rhs(mesh, bases, config.sigma, g)
    status = "ok"
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", regsolve.SolverWarning)
        report = regsolve.solve_uwvf(D, C, b, epsilon=config.epsilon)
        if any(issubclass(w.category, regsolve.SolverWarning) for w in caught):
            status = "warn"
    return report, bases, ref, status


def run_convergence(config: ExperimentConfig):
    """Error-vs-budget study; returns (rows, field grids per mode)."""
    mesh = config.build_mesh()
    rows = []
    best_fields = {}
    for mode in config.modes:
        for P in config.p_list:
            try:
                report, bases, ref, status = _solve_once(
                    mesh, config, config.kappa, P, mode)
            except regsolve.SingularSystemError as exc:
                rows.append([mode, P, math.nan, math.nan, math.nan,
                             math.nan, math.nan, f"error:{exc}"])
                continue
            fld = analysis.DiscreteField(mesh=mesh, bases=bases,
                                         coefficients=report.coefficients)
            err = analysis.h1_error(fld, ref, config.kappa)
            min_rank_ratio = min(st[2] / n for st, n in
                                 zip(report.block_stats,
                                     (b.n_trial for b in bases)))
            sig_ratio = min(st[1] / st[0] for st in report.block_stats)
            ndof = sum(b.n_trial for b in bases)
            rows.append([mode, P, ndof, err.relative, report.coeff_norm,
                         min_rank_ratio, sig_ratio, status])
            best_fields[mode] = (fld, ref)
    grids = {mode: _field_grid(config, fld, ref)
             for mode, (fld, ref) in best_fields.items()}
    return rows, grids


def _field_grid(config: ExperimentConfig, fld, ref):
    """Sample Re(u_h) and |u_h - u| on a cell-centered grid."""
    x0, x1, y0, y1 = config.domain
    n = config.field_resolution
    xs = x0 + (np.arange(n) + 0.5) * (x1 - x0) / n
    ys = y0 + (np.arange(n) + 0.5) * (y1 - y0) / n
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    pts = np.column_stack((X.ravel(), Y.ravel()))
    vals, _ = analysis.eval_field(fld, pts)
    ref_vals, _ = ref(pts)
    rows = [[pts[i, 0], pts[i, 1], float(vals[i].real),
             float(abs(vals[i] - ref_vals[i]))] for i in range(len(pts))]
    return rows


def run_ksweep(config: ExperimentConfig):
    """Fixed mesh, P = 4*kappa per cell, source tracking the wavelength."""
    mesh = config.build_mesh()
    rows = []
    for kappa in config.kappa_list:
        P = int(round(4 * kappa))
        for mode in config.modes:
            try:
                report, bases, ref, status = _solve_once(mesh, config, kappa,
                                                         P, mode)
            except regsolve.SingularSystemError as exc:
                rows.append([kappa, mode, P, math.nan, math.nan,
                             f"error:{exc}"])
                continue
            fld = analysis.DiscreteField(mesh=mesh, bases=bases,
                                         coefficients=report.coefficients)
            err = analysis.h1_error(fld, ref, kappa)
            rows.append([kappa, mode, P, err.relative, report.coeff_norm,
                         status])
    return rows


def run_stability(config: ExperimentConfig):
    """Coefficient-norm blow-up probe on the unit disc."""
    rows = []
    for m in config.m_list:
        for mode in config.modes:
            for P in config.probe_p_list:
                rep = analysis.stability_probe(
                    m, config.kappa, P, mode, epsilon=config.epsilon,
                    stream_offset=config.stream_offset)
                rows.append([m, mode, P, rep.delta, rep.mu_norm])
    return rows


# -- selftest --------------------------------------------------------------


def _check(name, fn):
    try:
        fn()
        return (name, True, "")
    except AssertionError as exc:
        return (name, False, str(exc))


def _selftest_phi0():
    assert specialfn.phi0(0.0) == 1.0
    val = specialfn.phi0(1j * math.pi)
    assert abs(val - 0.6366197723675814j) < 1e-14, f"phi0(i pi) = {val}"
    val = specialfn.phi0(-50.0)
    assert abs(val - 0.02) < 1e-12, f"phi0(-50) = {val}"
    # entire-function check on a small circle
    for ang in np.linspace(0, 2 * math.pi, 17):
        a = 1e-4 * np.exp(1j * ang)
        taylor = 1 + a / 2 + a * a / 6
        assert abs(specialfn.phi0(a) - taylor) < 1e-13


def _selftest_bessel():
    for m in range(1, 9):
        for x in np.linspace(0.4, 40.0, 13):
            lhs = specialfn.bessel_j(m - 1, x) + specialfn.bessel_j(m + 1, x)
            rhs = 2 * m / x * specialfn.bessel_j(m, x)
            assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs)), (m, x)
    for x in np.linspace(0.3, 30.0, 23):
        w = (specialfn.bessel_j(1, x) * specialfn.bessel_y(0, x)
             - specialfn.bessel_j(0, x) * specialfn.bessel_y(1, x))
        assert abs(w - 2 / (math.pi * x)) <= 1e-10 * abs(w), x
    h = 1e-5
    fd = (specialfn.hankel1(0, 5 + h) - specialfn.hankel1(0, 5 - h)) / (2 * h)
    assert abs(fd + specialfn.hankel1(1, 5.0)) < 1e-6


def _selftest_edge_integrals():
    from .quadrature import segment_rule

    rng = np.random.default_rng(7)
    for _ in range(50):
        kappa = float(rng.choice([1.0, 16.0, 64.0]))
        v0 = rng.uniform(-1, 1, 2)
        v1 = v0 + rng.uniform(-1, 1, 2)
        third = v0 + rng.uniform(-1, 1, 2)
        anchors = np.array([v0, v1, third])
        pair = [waves.make_epw(rng.uniform(0, 2 * math.pi),
                               int(rng.choice([1, -1])),
                               float(rng.choice([0.0, 1.0, 8.0])), kappa)
                for _ in range(2)]
        scale = max(kappa * (w.zeta + w.eta) for w in pair)
        length = float(np.hypot(*(v1 - v0)))
        if scale * length > 40.0:
            v1 = v0 + (v1 - v0) * (40.0 / (scale * length))
            anchors = np.array([v0, v1, third])
        nw = [waves.normalize_wave(w, anchors) for w in pair]
        closed = assembly.edge_integral(v0, v1, nw[0], nw[1])
        pts, wts = segment_rule(v0, v1, 256)
        quad = np.sum(wts * nw[0].eval(pts) * np.conj(nw[1].eval(pts)))
        denom = max(abs(quad), 1e-30)
        assert abs(closed - quad) / denom < 1e-12, (closed, quad)


def _selftest_svd():
    rng = np.random.default_rng(11)
    for rows, cols in ((8, 5), (40, 32), (60, 60)):
        A = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
        svd = regsolve.complex_svd(A)
        rec = svd.U @ np.diag(svd.S) @ svd.V.conj().T
        assert np.linalg.norm(rec - A) <= 1e-12 * np.linalg.norm(A)
        pinv = regsolve.truncated_pinv(svd, 1e-14)
        if rows == cols:
            err = np.linalg.norm(A @ pinv.matrix - np.eye(rows))
            assert err < 1e-10, err


def _selftest_consistency():
    kappa, sigma = 16.0, 1.0
    msh = meshmod.build_rect_mesh((0, -0.5), (1, 0.5), 3, 3, jitter=0.3, seed=2)
    target = waves.make_epw(0.9, 1, 0.0, kappa)
    bases = []
    off = 0
    for k in range(msh.num_elements):
        geom = waves.triangle_geometry(msh, k)
        trial = [waves.normalize_wave(target, geom.anchors)] + \
            waves.sample_basis(geom, 8, kappa, waves.MODE_PPW, stream_offset=off)
        off += 8
        bases.append(waves.ElementBasis(elem_id=k, trial=trial, test=trial))
    D = assembly.assemble_D(msh, bases, sigma)
    C = assembly.assemble_C(msh, bases, sigma)
    ref = analysis.reference_plane_wave(target)
    b = assembly.assemble_rhs(msh, bases, sigma,
                              assembly.manufacture_g(ref, sigma, kappa))
    rep = regsolve.solve_uwvf(D, C, b)
    fld = analysis.DiscreteField(mesh=msh, bases=bases,
                                 coefficients=rep.coefficients)
    err = analysis.h1_error(fld, ref, kappa)
    assert err.relative <= 1e-8, err.relative


def _selftest_mesh():
    msh = meshmod.build_rect_mesh((0, -0.5), (1, 0.5), 4, 5, jitter=0.25, seed=0)
    assert msh.num_elements == 40
    # handshake identity
    assert 3 * msh.num_elements == 2 * len(msh.interior_edges) + len(msh.boundary_edges)
    # boundary perimeter preserved under jitter
    total = msh.edge_length[msh.boundary_edges].sum()
    assert abs(total - 4.0) < 1e-12 * 4.0


def run_selftest(stream=sys.stdout) -> bool:
    checks = [
        ("phi0 segment integral", _selftest_phi0),
        ("bessel identities", _selftest_bessel),
        ("edge integrals vs quadrature", _selftest_edge_integrals),
        ("svd reconstruction/pinv", _selftest_svd),
        ("manufactured solution", _selftest_consistency),
        ("mesh invariants", _selftest_mesh),
    ]
    results = [_check(name, fn) for name, fn in checks]
    width = max(len(name) for name, _, _ in results)
    for name, ok, msg in results:
        line = f"{name:<{width}}  {'PASS' if ok else 'FAIL'}"
        if msg:
            line += f"  ({msg})"
        print(line, file=stream)
    return all(ok for _, ok, _ in results)


# -- argument parsing ------------------------------------------------------


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--kappa", type=float, help="wavenumber override")
    p.add_argument("--out", help="output directory override")
    p.add_argument("--full", action="store_true",
                   help="paper-scale settings (kappa=128, P up to 815)")
    p.add_argument("--p-list", help="comma-separated per-element budgets")
    p.add_argument("--modes", help="comma-separated wave families (PPW,EPW)")
    p.add_argument("--mesh-file", help="load mesh from file instead of building")
    p.add_argument("--resolution", type=int, help="field grid resolution")
    p.add_argument("--kappa-list", help="comma-separated wavenumbers (ksweep)")
    p.add_argument("--m-list", help="comma-separated mode indices (stability)")


def _config_from_args(args) -> ExperimentConfig:
    overrides = {
        "kappa": args.kappa,
        "out_dir": args.out,
        "mesh_file": args.mesh_file,
        "field_resolution": args.resolution,
    }
    if args.p_list:
        overrides["p_list"] = _parse_value("p_list", args.p_list)
    if args.modes:
        overrides["modes"] = _parse_value("modes", args.modes)
    if args.kappa_list:
        overrides["kappa_list"] = _parse_value("kappa_list", args.kappa_list)
    if args.m_list:
        overrides["m_list"] = _parse_value("m_list", args.m_list)
    config = load_config(args.config, overrides)
    if args.full:
        full = {k: v for k, v in FULL_SCALE.items()}
        if args.kappa is not None:
            full.pop("kappa", None)
        config = replace(config, **full)
    return config


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="trefftz-epw",
        description="Helmholtz Trefftz experiments with plane-wave bases")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("convergence", "ksweep", "stability", "mesh"):
        _add_common(sub.add_parser(name))
    sub.add_parser("selftest")
    args = parser.parse_args(argv)

    if args.command == "selftest":
        return 0 if run_selftest() else 1

    config = _config_from_args(args)
    os.makedirs(config.out_dir, exist_ok=True)

    if args.command == "mesh":
        msh = config.build_mesh()
        path = os.path.join(config.out_dir, "mesh.txt")
        meshmod.save_mesh(msh, path)
        print(f"wrote {path}: {msh.num_vertices} vertices, "
              f"{msh.num_elements} triangles, "
              f"{len(msh.interior_edges)} interior edges")
        return 0

    if args.command == "convergence":
        rows, grids = run_convergence(config)
        write_csv(os.path.join(config.out_dir, "convergence.csv"),
                  ["mode", "P", "ndof_total", "rel_h1_error", "coeff_norm",
                   "min_rank_ratio", "sigma_min_over_max", "status"],
                  rows, config)
        for mode, grid_rows in grids.items():
            write_csv(os.path.join(config.out_dir, f"field_{mode}.csv"),
                      ["x", "y", "re_u", "abs_err"], grid_rows, config)
        print(f"wrote convergence results for {len(rows)} runs to {config.out_dir}")
        return 0

    if args.command == "ksweep":
        rows = run_ksweep(config)
        write_csv(os.path.join(config.out_dir, "ksweep.csv"),
                  ["kappa", "mode", "P", "rel_h1_error", "coeff_norm",
                   "status"], rows, config)
        print(f"wrote {len(rows)} sweep rows to {config.out_dir}")
        return 0

    if args.command == "stability":
        rows = run_stability(config)
        write_csv(os.path.join(config.out_dir, "stability.csv"),
                  ["m", "mode", "P", "delta", "mu_norm"], rows, config)
        print(f"wrote {len(rows)} probe rows to {config.out_dir}")
        return 0

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
