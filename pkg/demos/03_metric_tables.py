"""
Per-class metrics from a confusion matrix
=========================================

One-vs-rest tallies turn a k-class confusion matrix into k binary problems.
Macro averaging treats the classes equally; micro pools the samples.
"""

from lungline.cli import evaluation_report
from lungline.metrics import ConfusionMatrix, aggregate

classes = ["COVID-19", "Normal", "Viral Pneumonia"]
# rows are true classes, columns predictions
cm = ConfusionMatrix([[95, 1, 4],
                      [0, 119, 22],
                      [0, 2, 143]])

print(evaluation_report(cm, classes, "macro").to_text())

for mode in ("macro", "micro"):
    m = aggregate(cm, mode).metrics
    print(f"{mode}: acc {100 * m.acc:.2f}  sen {100 * m.sen:.2f}  spe {100 * m.spe:.2f}")

# a class that is never predicted has no precision; it is left out of the macro mean
lopsided = ConfusionMatrix([[5, 0], [3, 0]])
agg = aggregate(lopsided, "macro")
print("precision undefined for classes", agg.excluded.get("pre"), "-> macro pre", agg.metrics.pre)
