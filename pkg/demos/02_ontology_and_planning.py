# coding: utf-8

# # From requirements to tools
#
# The reference ontology says which metrics measure which requirement, under
# which mathematical definition, for which kind of system. Tool cards claim
# (metric, definition) pairs. Planning picks a small set of tools covering
# every target and reports what nobody can measure.

# In[1]:

import json
import tempfile
from pathlib import Path

from mockcards import DATA, card, hiring_tools

from aits.dsl import merge, parse_extensions, parse_spec
from aits.ontology import check_consistency, load_triples, resolve_metrics
from aits.registry import lint_card, load_catalogue, plan_assessment

ont = load_triples((DATA / "reference.aitso").read_text())
print(len(ont), "triples, findings:", check_consistency(ont))


# Resolution follows sub-requirements, so the robustness metric attached
# to AIA.Art15.robustness shows up under AIA.Art15. The toxicity metric only
# applies to generative systems.

# In[2]:

for st in ("classifier", "generative"):
    print(st, sorted(m.metric_id for m in resolve_metrics(ont, "AIA.Art15", st)))


# A card that claims a different definition for a metric is rejected: the
# same name with different maths is not the same measurement.

# In[3]:

work = Path(tempfile.mkdtemp())
rogue = card(work / "rogue", "rogue", {"fair.dpd": 0.01})
doc = json.loads(rogue.read_text())
doc["metrics"][0]["definition_id"] = "def:0000000000000000"
_, findings = lint_card(doc, ont)
for f in findings:
    print(f)


# Plan with only the fairness tool, then with all three.

# In[4]:

eff = merge(parse_spec((DATA / "screener.aits").read_text()),
            parse_extensions((DATA / "employment.aitsx").read_text()))
tools = hiring_tools(work / "cards")

partial = plan_assessment(eff, ont, load_catalogue([tools[0]], ont))
print("selected:", partial.selected_tools)
for g in partial.gaps:
    print("  gap", g.requirement_id, g.metric_id, g.reason)

full = plan_assessment(eff, ont, load_catalogue([work / "cards"], ont))
print("selected:", full.selected_tools, "gaps:", len(full.gaps))
for a in full.assignments:
    print("  ", a.requirement_id, a.metric_id, "->", a.tool_id)
