# Calibration on a problem where the true posterior is known.
#
# overlap2d has two unit Gaussians at (-1, 0) and (1, 0).  Its exact posterior
# is calibrated by construction, so its ECE should be close to 0, and its
# accuracy is the best any classifier can reach (about 0.841).

import numpy as np

from arcmix import bayes_decision, confidences_and_hits, ece, evaluate, overlap2d, sample_dataset, true_posterior
from arcmix.datasets import bayes_error_estimate
from arcmix.nn import softmax
from arcmix.streams import make_rng

spec = overlap2d()
data = sample_dataset(spec, 100_000, make_rng(0))
post = true_posterior(spec, data.inputs)

rep = evaluate(post, data.labels)
print(f"exact posterior   acc {rep.accuracy:.4f}  ECE {rep.ece:.4f}  brier {rep.brier:.4f}  nll {rep.nll:.4f}")

err, se = bayes_error_estimate(spec, 100_000, make_rng(1))
print(f"Bayes accuracy    {1 - err:.4f} +- {se:.4f}")

# Sharpen or flatten the same posterior.  Accuracy is unchanged (argmax is
# preserved) but calibration and both proper scores get worse.
for temp in (0.5, 2.0):
    warped = softmax(np.log(post) / temp)
    r = evaluate(warped, data.labels)
    print(f"temperature {temp:<4}  acc {r.accuracy:.4f}  ECE {r.ece:.4f}  brier {r.brier:.4f}  nll {r.nll:.4f}")

# Reliability table for the over-confident version
sharp = softmax(np.log(post) / 0.5)
recs = confidences_and_hits(sharp, data.labels)
print("\nbin          count   conf    acc")
for i, b in enumerate(evaluate(sharp, data.labels, 10).bins):
    if b.count:
        print(f"({i / 10:.1f}, {(i + 1) / 10:.1f}]  {b.count:6d}  {b.mean_confidence:.3f}  {b.accuracy:.3f}")
print(f"ECE (10 bins) {ece(recs, 10):.4f}")

# Decisions depend on the costs, not only on the posterior.  Taking action 0
# when the truth is class 1 costs 10; the opposite mistake costs 1.
costs = np.array([[0.0, 10.0], [1.0, 0.0]])
print("\nposterior [0.6, 0.4]: zero-one ->", bayes_decision([0.6, 0.4]), "| asymmetric ->", bayes_decision([0.6, 0.4], costs))
