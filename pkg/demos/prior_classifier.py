# Why ARC is added to cross-entropy instead of replacing it.
#
# A network that always outputs the class prior is perfectly calibrated:
# its confidence (0.5 on balanced overlap2d) equals its accuracy.  Trained on
# a strong ARC term alone, the network ends up there: it first saturates to
# confidence 1, then slides down to the prior.

import numpy as np

from arcmix import prepare_data, train
from arcmix.harness import load_config
from arcmix.training import predict_proba

cfg = load_config("demos/configs/arc_only.yaml")
data = prepare_data(cfg)
r = train(cfg, data)
conf = predict_proba(r.params, data[2].inputs).max(axis=1)

print(f"ARC only      acc {r.test.accuracy:.3f}  ECE {r.test.ece:.3f}  mean confidence {conf.mean():.3f}")
for epoch in (0, 9, 49, 199):
    print(f"  epoch {epoch + 1:3d}: test acc {r.curves['test_accuracy'][epoch]:.3f}  ECE {r.curves['test_ece'][epoch]:.3f}")

# the same data with cross-entropy back in, at a moderate ARC weight
with_ce = cfg.replace(arc_only=False, arc={"arc_weight": 1.0})
r2 = train(with_ce, data)
conf2 = predict_proba(r2.params, data[2].inputs).max(axis=1)
print(f"CE + ARC      acc {r2.test.accuracy:.3f}  ECE {r2.test.ece:.3f}  mean confidence {conf2.mean():.3f}")
