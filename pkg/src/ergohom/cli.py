"""Command-line entry point: ``ergohom <command> --config FILE``.

Exit status is 0 on success, 1 on configuration errors and 2 on numerical
failures.  Result tables are deterministic functions of (config, seed); the
manifest adds timestamps and content hashes of every file written.
"""

from __future__ import annotations

import argparse
import copy
import datetime as dt
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, config as cfgmod, io
from .convergence import DirichletProblem, convergence_study
from .corrector import SolverError, homogenize, voigt_reuss_bounds
from .fields import EllipticityError
from .gaussian import EmbeddingError
from .measure import LawEstimationError, estimate_law, sample_component
from .resonance import kernel_basis
from .streams import stream

THREADS_ENV = "ERGOHOM_THREADS"
NUMERICAL_ERRORS = (SolverError, LawEstimationError, EmbeddingError, EllipticityError, np.linalg.LinAlgError)

log = logging.getLogger("ergohom")


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class _Run:
    def __init__(self, cfg, command, out_dir, threads):
        self.cfg = cfg
        self.command = command
        self.out = Path(out_dir)
        self.threads = threads
        self.files: list[Path] = []
        self.seeds: list[int] = []
        self.objs = cfgmod.build(cfg, command)
        self.seed = cfg["master_seed"]

    def write(self, name, text):
        path = self.out / name
        path.write_text(text)
        self.files.append(path)
        return path

    def homogenize(self):
        grid = self.objs["grid"]
        rng = stream(self.seed, 0)
        label, gen = sample_component(self.objs["measure"], rng)
        fld = gen(grid, rng)
        A = homogenize(fld, self.objs["tol"], self.objs["max_iter"])
        lower, upper = voigt_reuss_bounds(fld)
        self.seeds = [0]
        d = grid.dim
        names = io.entry_names(d)
        iu = np.triu_indices(d)
        lines = ["quantity " + " ".join(names)]
        for name, M in (("homogenized", A.entries), ("reuss", lower), ("voigt", upper)):
            lines.append(name + " " + " ".join(io.fmt(x) for x in M[iu]))
        self.write("homogenized.txt", "\n".join(lines) + "\n")
        print("A_h =", np.array2string(A.entries, precision=10))

    def law(self):
        law = estimate_law(self.objs["measure"], self.cfg["samples"], self.objs["grid"], self.seed,
                           self.objs["tol"], self.objs["max_iter"], self.threads)
        self.seeds = list(range(self.cfg["samples"]))
        self.write("law.txt", io.law_table(law))
        labels = {str(i): lab.columns() for i, lab in zip(law.seed_indices, law.labels)}
        meta = {"config_hash": cfgmod.config_hash(self.cfg), "master_seed": self.seed,
                "samples": self.cfg["samples"], "aborted": law.aborted, "labels": labels}
        self.write("law.meta.json", json.dumps(meta, sort_keys=True, indent=1) + "\n")
        support = law.support()
        print(f"{len(law)} samples, {len(support)} distinct matrices")

    def resonance(self):
        lattice = kernel_basis(self.objs["frequencies"])
        rows = [" ".join(str(x) for x in row) for row in lattice.basis]
        text = f"# rank {lattice.rank} N {lattice.N}\n" + "".join(r + "\n" for r in rows)
        self.write("resonance.txt", text)
        print(f"rank {lattice.rank}")
        for r in rows:
            print(r)

    def converge(self):
        c = self.cfg["convergence"]
        grid = self.objs["grid"]
        rng = stream(self.seed, 0)
        _, gen = sample_component(self.objs["measure"], rng)
        realization = gen(grid, rng)
        self.seeds = [0]
        problem = DirichletProblem(tuple(c.get("domain", [1.0] * grid.dim)), c.get("f", 1.0))
        mesh = problem.mesh(c["mesh_cells"]) if "mesh_cells" in c else None
        kw = dict(mesh=mesh, tol=self.objs["tol"], max_iter=self.objs["max_iter"])
        report = convergence_study(realization, problem, c["eps"], **kw)
        self.write("convergence.txt", io.convergence_table(report))
        self.write("convergence.csv", io.convergence_csv(report))
        for e, err, h1 in report.rows():
            print(f"eps={e:g} l2_error={err:.3e} h1={h1:.4f}")
        if c.get("control", "none") == "voigt":
            voigt = voigt_reuss_bounds(realization)[1]
            ctrl = convergence_study(realization, problem, c["eps"], homogenized=voigt, **kw)
            self.write("convergence_voigt.txt", io.convergence_table(ctrl))
            ratio = ctrl.errors[-1] / report.errors[-1] if report.errors[-1] else float("inf")
            log.info("voigt control final error ratio %.6g", ratio)
            print(f"voigt control: final error {ctrl.errors[-1]:.3e} ({ratio:.1f}x)")

    def sample_field(self):
        grid = self.objs["grid"]
        rng = stream(self.seed, 0)
        label, gen = sample_component(self.objs["measure"], rng)
        fld = gen(grid, rng)
        self.seeds = [0]
        prov = {"master_seed": self.seed, "sample_index": 0, "config_hash": cfgmod.config_hash(self.cfg),
                "component": label.columns(), "measure": self.cfg["measure"]["kind"]}
        written = io.write_field(self.out / "field.hmfd", fld, prov)
        self.files.extend(written)

    def execute(self):
        getattr(self, self.command.replace("-", "_"))()


def run(cfg: dict, command: str | None = None, out_dir=None, threads: int | None = None,
        seed_override: int | None = None) -> int:
    """Validate ``cfg``, dispatch ``command`` and write artifacts; returns the exit status."""
    cfg = copy.deepcopy(cfg)
    if seed_override is not None:
        cfg["master_seed"] = seed_override
    diags = cfgmod.validate(cfg, command)
    if diags:
        for d in diags:
            print(f"config error: {d}", file=sys.stderr)
        return 1
    command = command or cfg["command"]
    out_dir = Path(out_dir or cfg.get("output_dir") or "ergohom-out")
    out_dir.mkdir(parents=True, exist_ok=True)
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1"))
    started = _now()
    handler = logging.FileHandler(out_dir / "run.log", mode="w")
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s %(message)s"))
    root = logging.getLogger("ergohom")
    root.addHandler(handler)
    saved_level = root.level
    root.setLevel(logging.INFO)
    status = 0
    job = None
    try:
        job = _Run(cfg, command, out_dir, max(1, threads))
        log.info("command=%s master_seed=%d threads=%d", command, cfg["master_seed"], threads)
        job.execute()
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        log.error("numerical failure: %s", exc)
        status = 2
    finally:
        root.removeHandler(handler)
        root.setLevel(saved_level)
        handler.close()
    files = (job.files if job else []) + [out_dir / "run.log"]
    manifest = {
        "config_hash": cfgmod.config_hash(cfg),
        "toolkit_version": __version__,
        "command": command,
        "master_seed": cfg["master_seed"],
        "threads": threads,
        "started": started,
        "finished": _now(),
        "exit_status": status,
        "sample_seeds": [{"index": i, "stream": f"philox(master_seed, {i})"} for i in (job.seeds if job else [])],
        "outputs": [{"path": p.name, "sha256": _sha256(p)} for p in files],
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ergohom", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=cfgmod.COMMANDS + ("validate",))
    parser.add_argument("--config", required=True, help="JSON experiment configuration")
    parser.add_argument("--seed-override", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (default: ${THREADS_ENV} or 1)")
    parser.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    args = parser.parse_args(argv)
    try:
        cfg = cfgmod.load(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {args.config}: {exc}", file=sys.stderr)
        return 1
    if args.command == "validate":
        diags = cfgmod.validate(cfg, require_command=False)
        for d in diags:
            print(d)
        return 1 if diags else 0
    return run(cfg, args.command, args.out, args.threads, args.seed_override)


if __name__ == "__main__":
    sys.exit(main())
