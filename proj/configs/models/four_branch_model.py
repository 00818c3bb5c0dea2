#!/usr/bin/env python3
"""Four-branch limit state as an external model.

Reads one JSON request per line ({"id": k, "inputs": [x1, x2]}) and answers
{"id": k, "output": y}. With no argument it returns the high-fidelity
response; with an argument i in 1..4 it returns the i-th branch.
"""
import json
import math
import sys


def branch(i, x1, x2):
    r2 = math.sqrt(2.0)
    if i == 1:
        return 3 + (x1 - x2) ** 2 / 10 - (x1 + x2) / r2
    if i == 2:
        return 3 + (x1 - x2) ** 2 / 10 + (x1 + x2) / r2
    if i == 3:
        return (x1 - x2) + 6 / r2
    return (x2 - x1) + 6 / r2


def main():
    which = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    for line in sys.stdin:
        request = json.loads(line)
        x1, x2 = request["inputs"]
        if which:
            y = branch(which, x1, x2)
        else:
            y = min(branch(i, x1, x2) for i in range(1, 5))
        print(json.dumps({"id": request["id"], "output": y}), flush=True)


if __name__ == "__main__":
    main()
