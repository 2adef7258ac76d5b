"""Simulating a forced-choice preference study end to end.

Plan the trials, push five simulated participants through the
scheduler (with a mid-study crash and restart), then analyze the log:
per-method win rates and rater agreement.
"""

import os
import random
import tempfile

from minia.study import (
    Scheduler,
    TrialResponse,
    append_response,
    concordance_by_dataset,
    generate_plan,
    read_log,
    win_table,
)

FIGURES = [f"fig{i:02d}" for i in range(6)]
METHODS = ["ours", "baselineA", "baselineB", "baselineC"]

# Simulated taste: every participant prefers methods earlier in this
# list, but with some per-trial noise.
TRUE_ORDER = ["ours", "baselineB", "baselineA", "baselineC"]
rng = random.Random(7)


def choose(left, right):
    better = left if TRUE_ORDER.index(left) < TRUE_ORDER.index(right) else right
    if rng.random() < 0.15:  # 15% lapses
        better = left if better == right else right
    return "left" if better == left else "right"


plan = generate_plan(FIGURES, METHODS, repetitions_target=50, seed=1)
print(f"plan: {len(plan)} trials over {len(FIGURES)} figures x "
      f"{len(METHODS) * (len(METHODS) - 1) // 2} method pairs")

log_path = os.path.join(tempfile.mkdtemp(prefix="minia-study-"), "responses.ndjson")
sched = Scheduler(plan)
participants = [f"p{i}" for i in range(5)]

answered = 0
crashed = False
while True:
    progressed = False
    for p in participants:
        issued = sched.next_trial(p)
        if issued is None:
            continue
        resp = TrialResponse(
            trial_id=issued.trial_id,
            participant_id=p,
            left_method=issued.left_method,
            right_method=issued.right_method,
            choice=choose(issued.left_method, issued.right_method),
        )
        append_response(log_path, resp)   # durable before counted
        sched.record(resp)
        answered += 1
        progressed = True

        if answered == 40 and not crashed:
            crashed = True
            print("simulated crash at 40 responses; rebuilding from the log...")
            sched = Scheduler(plan)
            replayed = sched.replay(read_log(log_path))
            print(f"  replayed {replayed} responses; outstanding trials dropped")
    if not progressed:
        break

print(f"study complete: {answered} responses from {len(participants)} participants\n")

responses = read_log(log_path)
table = win_table(responses, plan)
print(f"{'method':10s} {'wins':>5s} {'total':>6s} {'win%':>6s}")
for m in table.methods:
    print(f"{m:10s} {table.wins.get(m, 0):5d} {table.totals[m]:6d} "
          f"{100 * table.win_pct(m):6.1f}")

split = {fig: ("engravings" if i % 2 else "paintings")
         for i, fig in enumerate(FIGURES)}
results = concordance_by_dataset(responses, METHODS, plan, split)
print()
for name, c in results.items():
    print(f"concordance[{name}]: W={c.w:.3f} p={c.p_value:.2g} "
          f"({c.rater_count} raters over {c.method_count} methods)")
