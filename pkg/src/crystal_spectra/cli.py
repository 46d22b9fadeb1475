"""Command-line front end: ``crystal-spectra {bands,spectrum,verify,catalog}``.

Every run is validated into a :class:`RunConfig` before any computation.
Outputs are rendered in memory first and written only once everything has
succeeded, so a failing run leaves no files behind.  Exit codes: 0 success,
2 usage or input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from . import crystal as cr
from . import floquet as fl
from . import spectra as sp
from . import verification as vf
from .errors import CrystalSpectraError, NumericError
from .perturbation import load_profile

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
DEFAULT_RADII = (100, 200, 400)


class UsageError(Exception):
    """Configuration rejected before any computation."""


@dataclass
class RunConfig:
    subcommand: str
    crystal: str | None = None
    perturbation: str | None = None
    grid: int = 64
    radii: list = field(default_factory=lambda: list(DEFAULT_RADII))
    tol: float = 1e-6
    out: str = "crystal-spectra-out"
    format: str = "csv"
    seed: int = 0
    suites: list = field(default_factory=list)
    operator: str = "gauss_bonnet"

    def validate(self):
        if self.subcommand in ("bands", "spectrum") and not self.crystal:
            raise UsageError("--crystal is required")
        for path in (self.crystal, self.perturbation):
            if path is not None and not Path(path).is_file():
                raise UsageError(f"no such file: {path}")
        if self.grid < 2:
            raise UsageError("--grid must be at least 2")
        if not self.tol > 0:
            raise UsageError("--tol must be positive")
        if self.subcommand == "spectrum":
            if len(self.radii) < 3:
                raise UsageError("the stability scan needs at least three --radius values")
            if any(r < 1 for r in self.radii) or any(b <= a for a, b in zip(self.radii, self.radii[1:])):
                raise UsageError("--radius values must be positive and strictly increasing")
        unknown = [s for s in self.suites if s not in vf.SUITES]
        if unknown:
            raise UsageError(f"unknown suite {unknown[0]!r}; choose from {', '.join(vf.SUITES)}")
        return self

    def to_dict(self):
        return asdict(self)


def _file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest() if path else None


def provenance(config):
    """Config echo plus a hash over it and the input file contents.

    The output directory is left out of the hash so the same inputs hash the
    same wherever they are written.
    """
    echoed = config.to_dict()
    inputs = {"crystal": _file_digest(config.crystal), "perturbation": _file_digest(config.perturbation)}
    hashed = {k: v for k, v in echoed.items() if k != "out"}
    hashed["inputs"] = inputs
    digest = hashlib.sha256(json.dumps(hashed, sort_keys=True).encode()).hexdigest()
    return {"tool": "crystal-spectra", "version": __version__, "config": echoed,
            "input_sha256": inputs, "config_hash": digest}


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_outputs(out_dir, files):
    """Write ``{name: text}`` into ``out_dir`` all-or-nothing.

    Everything is staged in a temporary directory next to the target and
    moved in only after every file was written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        with tempfile.TemporaryDirectory(dir=out, prefix=".staging-") as stage:
            for name, text in files.items():
                Path(stage, name).write_text(text, encoding="utf-8", newline="")
            for name in files:
                os.replace(Path(stage, name), out / name)
                written.append(out / name)
    except OSError:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    return [str(out / name) for name in files]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

PLOT_BANDS = '''"""Plot the band functions written next to this script (needs matplotlib)."""
import csv
import json
import pathlib

import matplotlib.pyplot as plt

here = pathlib.Path(__file__).parent
if (here / "bands.csv").exists():
    with open(here / "bands.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    dims = sum(1 for h in rows[0] if h.startswith("xi_"))
    data = [[float(x) for x in r] for r in rows[1:]]
else:
    raw = json.loads((here / "bands.json").read_text())
    dims = len(raw["xi"][0])
    data = [x + e for x, e in zip(raw["xi"], raw["eigenvalues"])]
fig, ax = plt.subplots()
xs = [r[0] for r in data] if dims == 1 else list(range(len(data)))
for k in range(dims, len(data[0])):
    ax.plot(xs, [r[k] for r in data], ".", ms=2 if dims == 1 else 1)
ax.set_xlabel("xi" if dims == 1 else "grid index (lexicographic)")
ax.set_ylabel("energy")
fig.savefig(here / "bands.png", dpi=150)
'''

PLOT_SPECTRUM = '''"""Plot eigenvalues against the band union for each radius (needs matplotlib)."""
import json
import pathlib

import matplotlib.pyplot as plt

here = pathlib.Path(__file__).parent
report = json.loads((here / "spectrum.json").read_text())
fig, ax = plt.subplots()
for lo, hi in report["band_union"]:
    ax.axhspan(lo, hi, color="0.9")
for r in report["scan"]["reports"]:
    ax.plot([r["radius"]] * len(r["eigenvalues"]), r["eigenvalues"], "_", ms=8)
ax.set_xlabel("truncation radius")
ax.set_ylabel("eigenvalue")
fig.savefig(here / "spectrum.png", dpi=150)
'''


def _load_crystal(path):
    return cr.build_crystal(cr.CrystalDescriptor.load(path))


def cmd_bands(config):
    crystal = _load_crystal(config.crystal)
    fibre = "edge_laplacian" if config.operator == "edge_laplacian" else "gauss_bonnet"
    bands = fl.compute_bands(crystal, config.grid, fibre=fibre)
    summary = fl.bands_summary(bands, fl.estimate_thresholds(bands))
    summary["provenance"] = provenance(config)
    files = {"bands_summary.json": _dump(summary), "plot_bands.py": PLOT_BANDS}
    if config.format == "csv":
        files["bands.csv"] = fl.bands_csv(bands)
    else:
        files["bands.json"] = _dump({"xi": bands.xi.tolist(), "eigenvalues": bands.eigenvalues.tolist()})
    return files, f"{bands.xi.shape[0]} grid points, {bands.num_bands} bands"


def cmd_spectrum(config):
    crystal = _load_crystal(config.crystal)
    measure = potential = None
    if config.perturbation:
        measure, potential = load_profile(crystal, config.perturbation)
    fibre = "edge_laplacian" if config.operator == "edge_laplacian" else "gauss_bonnet"
    bands = fl.compute_bands(crystal, config.grid, fibre=fibre)
    thresholds = fl.estimate_thresholds(bands)
    scan = sp.gap_stability_scan(crystal, measure, potential, config.radii, bands, tol=config.tol,
                                 operator=config.operator, thresholds=thresholds.values)
    doc = {"band_union": [list(iv) for iv in scan.reports[0].band_union],
           "thresholds": thresholds.values, "scan": scan.to_dict(), "provenance": provenance(config)}
    files = {"spectrum.json": _dump(doc), "plot_spectrum.py": PLOT_SPECTRUM}
    if config.format == "csv":
        lines = ["radius,eigenvalue,label"]
        for rep in scan.reports:
            lines += [f"{rep.radius},{v!r},{lab}" for v, lab in zip(rep.eigenvalues, rep.labels)]
        files["spectrum.csv"] = "\n".join(lines) + "\n"
    message = f"gap counts {scan.counts} over radii {scan.radii}: {scan.verdict}"
    return files, message


def cmd_verify(config):
    crystals = [_load_crystal(config.crystal)] if config.crystal else None
    results = vf.run_suites(config.suites or None, crystals, config.seed)
    report = {"seed": config.seed, "all_passed": all(r.passed for r in results),
              "suites": [r.to_dict() for r in results], "provenance": provenance(config)}
    width = max(len(r.suite) for r in results)
    table = [f"{'suite':<{width}}  status  max_residual  tolerance"]
    table += [f"{r.suite:<{width}}  {'pass' if r.passed else 'FAIL'}    {r.max_residual:.3e}     {r.tolerance:.0e}"
              for r in results]
    return {"verify.json": _dump(report)}, "\n".join(table), report["all_passed"]


def cmd_catalog(config):
    files = {f"{name}.json": cr.standard_lattice(name).to_json() + "\n" for name in cr.CATALOG}
    return files, "\n".join(cr.CATALOG)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="crystal-spectra", formatter_class=fmt,
                                     description="Band structures and truncated spectra of periodic graphs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, crystal_required):
        p.add_argument("--crystal", required=crystal_required, metavar="PATH", help="crystal descriptor JSON")
        p.add_argument("--out", default="crystal-spectra-out", metavar="DIR", help="output directory")

    b = sub.add_parser("bands", formatter_class=fmt, help="band structure on a torus grid")
    common(b, True)
    b.add_argument("--grid", type=int, default=64, metavar="N", help="grid points per torus axis")
    b.add_argument("--format", choices=("csv", "json"), default="csv", help="band table format")
    b.add_argument("--operator", choices=sp.OPERATORS, default="gauss_bonnet", help="fibre operator")

    s = sub.add_parser("spectrum", formatter_class=fmt, help="truncated spectra and gap stability")
    common(s, True)
    s.add_argument("--perturbation", metavar="PATH", default=None, help="perturbation profile JSON")
    s.add_argument("--radius", type=int, action="append", metavar="R", default=None,
                   help=f"truncation radius, repeatable (default: {' '.join(map(str, DEFAULT_RADII))})")
    s.add_argument("--grid", type=int, default=64, metavar="N", help="grid for the reference bands")
    s.add_argument("--tol", type=float, default=1e-6, help="band-edge tolerance")
    s.add_argument("--format", choices=("csv", "json"), default="json",
                   help="json writes the report only; csv adds an eigenvalue table")
    s.add_argument("--operator", choices=sp.OPERATORS, default="gauss_bonnet", help="operator to truncate")

    v = sub.add_parser("verify", formatter_class=fmt, help="run the invariant suites")
    common(v, False)
    v.add_argument("--suite", action="append", choices=list(vf.SUITES), default=None,
                   help="suite to run, repeatable (default: all)")
    v.add_argument("--seed", type=int, default=0, help="seed for the random test data")

    c = sub.add_parser("catalog", formatter_class=fmt, help="list catalog crystals; write them with --out")
    c.add_argument("--out", default=None, metavar="DIR", help="directory to write descriptors into")
    return parser


def config_from_args(args):
    cfg = RunConfig(subcommand=args.subcommand)
    for name in ("crystal", "perturbation", "grid", "tol", "out", "format", "seed", "operator"):
        if hasattr(args, name):
            setattr(cfg, name, getattr(args, name))
    if getattr(args, "radius", None):
        cfg.radii = list(args.radius)
    if getattr(args, "suite", None):
        cfg.suites = list(args.suite)
    return cfg.validate()


COMMANDS = {"bands": cmd_bands, "spectrum": cmd_spectrum, "verify": cmd_verify, "catalog": cmd_catalog}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
        result = COMMANDS[config.subcommand](config)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        print(json.dumps(getattr(exc, "diagnostics", {}), sort_keys=True, default=str), file=sys.stderr)
        return EXIT_NUMERIC
    except (CrystalSpectraError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    files, message = result[0], result[1]
    status = EXIT_OK if len(result) < 3 or result[2] else 1
    if config.out is not None:
        try:
            write_outputs(config.out, files)
        except OSError as exc:
            print(f"error: cannot write outputs: {exc}", file=sys.stderr)
            return EXIT_INPUT
    print(message)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
