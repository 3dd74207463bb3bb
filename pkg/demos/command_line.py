"""
Driving experiments from a config file
======================================

The ``axiboussinesq.cli`` module wires everything into four subcommands:
``run``, ``verify``, ``convergence`` and ``plotdata``.  Here we call it in
process on a throwaway directory.
"""

import tempfile
from pathlib import Path

from axiboussinesq import cli

work = Path(tempfile.mkdtemp())
(work / "exp.cfg").write_text("""
[grid]
nr = 16
nz = 32
[physics]
kappa_sweep = [0.0, 1.0]
[time]
t_end = 0.2
""")

code = cli.main(["run", "--config", str(work / "exp.cfg"), "--out", str(work / "out")])
print("run exit code", code)
print(sorted(p.relative_to(work).as_posix() for p in (work / "out").rglob("*.csv")))

code = cli.main(["plotdata", str(work / "out")])
print("overlay file:", (work / "out" / "overlay_kappa.dat").exists())
