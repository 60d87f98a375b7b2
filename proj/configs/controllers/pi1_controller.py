#!/usr/bin/env python3
# Line protocol: {"y": [y1, y2]} in, {"u": [u]} out.
import json
import sys

for line in sys.stdin:
    y = json.loads(line)["y"]
    u = -1.2 if y[0] <= 10 else 1.2
    print(json.dumps({"u": [u]}), flush=True)
