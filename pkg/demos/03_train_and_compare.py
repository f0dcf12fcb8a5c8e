"""
Training agents and comparing them
==================================

Train a baseline agent and a feedback agent for a short budget, then
evaluate both with and without the teacher. Pass a larger iteration count
on the command line for a more meaningful comparison (the acceptance suite
uses the full default budget).
"""

import sys

from asknav.config import parse_config
from asknav.curriculum import comparison_table, evaluate
from asknav.trainer import run_split, train

iterations = int(sys.argv[1]) if len(sys.argv) > 1 else 20
episodes = 100

reports = {}
for label, method, eta in [("Baseline", "baseline", 0), ("Feedback", "feedback", 100), ("Semi-75", "semi", 75)]:
    cfg = parse_config(f"""
seed = 0
curriculum.method = "{method}"
curriculum.eta_percent = {eta}
curriculum.total_iterations = {iterations}
curriculum.checkpoint_every = {max(iterations, 1)}
""")
    result = train(cfg, f"runs/demo/{method}", progress=lambda s: print(
        f"  {label} it {s['iteration']:4d}  train SR {s['sr_train'] if s['sr_train'] == '' else round(s['sr_train'], 2)}",
        end="\r"))
    print()
    params = result.checkpoint.policy()
    for presence in ([False, True] if method != "baseline" else [False]):
        for split in ("seen", "unseen"):
            reports[(label, presence, split)] = evaluate(
                params, run_split(cfg), presence, episodes, 1000,
                split_name=split, env_cfg=cfg.env, method=label)

print(comparison_table(reports).text)
