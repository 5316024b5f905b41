"""Regenerates n45.json: 45 nodes scattered over South Carolina, joined by a
geographic ring plus 25 nearest-neighbour chords (70 bidirectional links)."""
import json
import math
import random

rng = random.Random(45)
nodes = []
for i in range(45):
    lat = rng.uniform(32.3, 34.9)
    lon = rng.uniform(-83.0, -79.0)
    nodes.append({"id": f"sc{i:02d}", "lat": round(lat, 4), "lon": round(lon, 4)})

clat = sum(n["lat"] for n in nodes) / len(nodes)
clon = sum(n["lon"] for n in nodes) / len(nodes)
nodes.sort(key=lambda n: math.atan2(n["lat"] - clat, n["lon"] - clon))
for i, n in enumerate(nodes):
    n["id"] = f"sc{i:02d}"
    n["servers"] = 8
    n["server_capacity"] = 2000.0

edges = {tuple(sorted((i, (i + 1) % 45))) for i in range(45)}


def dist(a, b):
    return math.hypot(nodes[a]["lat"] - nodes[b]["lat"], nodes[a]["lon"] - nodes[b]["lon"])


candidates = sorted(
    (dist(a, b), a, b) for a in range(45) for b in range(a + 1, 45) if (a, b) not in edges
)
for _, a, b in candidates:
    if len(edges) == 70:
        break
    edges.add((a, b))

links = []
for a, b in sorted(edges):
    for s, d in ((a, b), (b, a)):
        links.append({"src": nodes[s]["id"], "dst": nodes[d]["id"], "capacity": 1000.0})

spec = {
    "name": "n45",
    "nodes": nodes,
    "links": links,
    "cloud": {"id": "cloud", "lat": 39.0438, "lon": -77.4874, "servers": 1},
}
with open("n45.json", "w") as f:
    json.dump(spec, f, indent=1)
    f.write("\n")
