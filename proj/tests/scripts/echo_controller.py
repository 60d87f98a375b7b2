#!/usr/bin/env python3
import json
import sys

for line in sys.stdin:
    y = json.loads(line)["y"]
    print(json.dumps({"u": [y[0]]}), flush=True)
