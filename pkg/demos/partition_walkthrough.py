"""Walk through the cloud decomposition on a handful of instances.

Shows the merge procedure step by step, then the final report: partition,
per-gap loads, particle speeds, and expected cloud widths.
"""

import numpy as np

from excloud import analyze, validate

INSTANCES = [
    ("single slow leader, four followers", [0.2, 1, 1, 1, 1], [1, 1, 1, 1, 1]),
    ("slow rates at both ends (drift-free)", [0.5, 1, 1, 1, 1, 1],
     [1, 1, 1, 1, 1, 0.5]),
    ("fast leader escapes", [0, 0, 0], [2, 1, 1.5]),
    ("middle pair teams up", [0, 0, 0], [1, 2, 1.5]),
    ("everyone drifts apart", [0.5, 0.3, 0.1], [0.6, 0.7, 0.8]),
]


def show(title, a, b):
    rates = validate(a, b)
    report = analyze(rates)
    print(f"=== {title}")
    print(f"    a = {rates.a.tolist()}")
    print(f"    b = {rates.b.tolist()}")
    for step in report.trace.steps:
        if step.merged is not None:
            action = f"merge parts {step.merged + 1}+{step.merged + 2}"
        elif step.iteration == 0:
            action = "start from singletons"
        else:
            action = "stable, stop"
        speeds = " ".join(f"{v:+.4f}" for v in step.speeds)
        print(f"    iter {step.iteration}: {action:<24s} "
              f"{step.partition!r}  speeds {speeds}")
    print(f"    partition      {report.partition!r}")
    print(f"    gap loads      {np.round(report.rho, 6).tolist()}")
    print(f"    speeds         {np.round(report.speeds, 6).tolist()}")
    for part, width in zip(report.partition, report.expected_widths):
        if width is not None:
            print(f"    cloud {set(part.labels)}: expected width "
                  f"{width:.6g} sites")
    print()


if __name__ == "__main__":
    for title, a, b in INSTANCES:
        show(title, a, b)
