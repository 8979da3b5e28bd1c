"""The input channel acts five seconds late, so the controller steers
toward where the leader will be, not where it is.  Every reference value
the forecast needs is already in the past, which makes the prediction
exact up to integration error.  Here the forecast at a handful of times is
checked against the leader state actually reached later in the same run.
"""

import numpy as np

from delaysync import predict_leader_regressor, run_scenario
from delaysync.cli import load_scenario

sc = load_scenario("example1")
trace = run_scenario(sc)

d_u = round(sc.tau_u / sc.step)
d_x = round(sc.tau_x / sc.step)
hold = sc.reference.piecewise_constant
r_of = lambda s: np.array([sc.reference(s)])  # noqa: E731  (the forecast wants a vector)

print("forecast horizon %.0f s, lag read %.0f s behind it" % (sc.tau_u, sc.tau_x))
print("time     |forecast - realized|")
worst = 0.0
for k in range(0, trace.num_rows - d_u, 2500):
    t = trace.times[k]
    pred = predict_leader_regressor(
        sc.leader, trace.x_m[k], r_of, t, sc.tau_u, sc.tau_x, sc.step,
        hold_reference=hold,
    )
    realized = np.concatenate([trace.x_m[k + d_u], trace.x_m[k + d_u - d_x], r_of(t)])
    err = np.max(np.abs(pred - realized))
    worst = max(worst, err)
    print("t=%6.1f  %.3e" % (t, err))
print("worst over the probes: %.3e" % worst)
