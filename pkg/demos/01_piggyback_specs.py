# coding: utf-8

# # Layered specs: a core sandbox plus a sector extension
#
# A core spec names the system type, its risk class and a table of
# requirements, each bound to metric thresholds. Sector extensions ride on
# top of it: they may add requirements or tighten thresholds, never loosen.

# In[1]:

from mockcards import DATA

from aits.dsl import format_spec, merge, parse_extension, parse_extensions, parse_spec, spec_hash
from aits.errors import DSLError, MergeError

core = parse_spec((DATA / "screener.aits").read_text())
print(core.name, core.version, core.system_type, core.risk_class)
for req in core.requirements:
    print(" ", req.id, [(b.metric_id, b.comparator, b.threshold_text) for b in req.bindings])


# The employment extension tightens the parity bound from 0.1 to 0.08 and
# adds a sector requirement on equalized odds.

# In[2]:

exts = parse_extensions((DATA / "employment.aitsx").read_text())
eff = merge(core, exts)
print(format_spec(eff))
print("origins:", eff.origins)


# Trying to relax a core threshold is refused, and so is flipping the
# comparator direction.

# In[3]:

loosen = parse_extension('''
extension "lenient" extends "hiring-screener" version "1.0" {
  refine requirement AIA.Art10 { metric fair.dpd <= 0.2 }
}''')
flip = parse_extension('''
extension "inverted" extends "hiring-screener" version "1.0" {
  refine requirement AIA.Art10 { metric fair.dpd >= 0.01 }
}''')
for ext in (loosen, flip):
    try:
        merge(core, [ext])
    except MergeError as exc:
        print("rejected:", exc)


# Parse errors point at the offending token.

# In[4]:

try:
    parse_spec('sandbox "x" version "1.0" {\n  system_type classifier\n  risk_class extreme\n}')
except DSLError as exc:
    print(exc)


# The canonical text is what gets hashed, so comments and layout do not
# change a spec's identity, while any semantic edit does.

# In[5]:

noisy = "# reviewed 2026-03\n" + (DATA / "screener.aits").read_text().replace("  ", "    ")
print(spec_hash(parse_spec(noisy)) == spec_hash(core))
print("core     ", spec_hash(core))
print("effective", spec_hash(eff))
