"""
Scenario files and the command line
===================================

Every bundled example is a JSON scenario; ``run_scenario`` is what the
``riboflow`` command calls.
"""

import tempfile

from riboflow.catalog import bundled_names, bundled_path, load_bundled
from riboflow.scenario import emit_scenario, run_scenario

print("bundled:", ", ".join(bundled_names()))
print(emit_scenario(load_bundled("example2_nsc"))[:400], "...")

with tempfile.TemporaryDirectory() as out:
    rep = run_scenario(load_bundled("triangle_massaction"), out, analysis="analyze")
    for name, chk in rep.manifest["checks"].items():
        print("PASS" if chk["pass"] else "FAIL", name, chk["value"])
    print("files:", rep.artifacts)

# same thing from a shell:
print(f"riboflow analyze --scenario {bundled_path('triangle_massaction')} --out out/")
