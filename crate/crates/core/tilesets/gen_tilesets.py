#!/usr/bin/env python3
"""Regenerates the preset tileset files.

Patterns are 3x3 ('#' occupied, '.' free, 'b' buffer). Two tiles may touch
when their shared edges agree cell-by-cell on occupied vs not-occupied.
The adjacency lists written to the JSON files are the result; the loader
only reads those lists, so hand edits to the JSON are honoured.
"""
import json
import os

ARMS = ("up", "right", "down", "left")


def pipe(center, arm, fill, arms):
    g = [[fill] * 3 for _ in range(3)]
    g[1][1] = center
    if "up" in arms:
        g[0][1] = arm
    if "right" in arms:
        g[1][2] = arm
    if "down" in arms:
        g[2][1] = arm
    if "left" in arms:
        g[1][0] = arm
    return ["".join(r) for r in g]


def arm_sets():
    for mask in range(16):
        yield mask, [a for i, a in enumerate(ARMS) if mask >> i & 1]


def pipe_name(prefix, arms):
    return prefix + ("_" + "".join(a[0] for a in arms) if arms else "_none")


def obstacle():
    tiles = [
        ("floor", 8.0, ["...", "...", "..."]),
        ("scatter", 2.0, ["...", ".b.", "..."]),
        ("block", 1.2, ["bbb", "b#b", "bbb"]),
    ]
    for mask, arms in arm_sets():
        n = len(arms)
        w = {0: 0.6, 1: 0.3, 2: 0.5, 3: 0.1, 4: 0.05}[n]
        tiles.append((pipe_name("wall", arms), w, pipe("#", "#", ".", arms)))
    return tiles


def labyrinth():
    tiles = [("solid", 0.6, ["###", "###", "###"])]
    for mask, arms in arm_sets():
        n = len(arms)
        straight = set(arms) in ({"up", "down"}, {"left", "right"})
        w = {0: 0.05, 1: 0.4, 2: 2.0 if straight else 1.5, 3: 0.8, 4: 0.4}[n]
        tiles.append((pipe_name("corridor", arms), w, pipe(".", ".", "#", arms)))
    return tiles


def warehouse():
    return [
        ("aisle", 3.0, ["...", "...", "..."]),
        ("aisle_pallets", 1.0, ["...", "...", "bbb"]),
        ("shelf", 3.0, ["...", "###", "..."]),
        ("shelf_end_left", 1.5, ["...", ".##", "..."]),
        ("shelf_end_right", 1.5, ["...", "##.", "..."]),
        ("post", 0.3, ["...", ".#.", "..."]),
    ]


def cavern():
    tiles = []
    for mask in range(16):
        tl, tr, bl, br = (bool(mask >> i & 1) for i in range(4))
        s = lambda v: "#" if v else "."
        solid_count = tl + tr + bl + br
        center = "#" if solid_count >= 3 else "."
        g = [
            [s(tl), s(tl and tr), s(tr)],
            [s(tl and bl), center, s(tr and br)],
            [s(bl), s(bl and br), s(br)],
        ]
        w = {0: 4.0, 4: 2.0}.get(solid_count, 1.0)
        name = "cave_%d%d%d%d" % (tl, tr, bl, br)
        tiles.append((name, w, ["".join(r) for r in g]))
        if solid_count == 0:
            g[1][1] = "b"
            tiles.append(("cave_open_rubble", 1.0, ["".join(r) for r in g]))
    return tiles


def edge(pattern, d):
    occ = lambda c: c == "#"
    if d == "up":
        cells = pattern[0]
    elif d == "down":
        cells = pattern[-1]
    elif d == "left":
        cells = [row[0] for row in pattern]
    else:
        cells = [row[-1] for row in pattern]
    return tuple(occ(c) for c in cells)


OPPOSITE = {"up": "down", "down": "up", "left": "right", "right": "left"}


def build(name, tiles, notes):
    adj = {}
    for n, _, p in tiles:
        adj[n] = {}
        for d in ARMS:
            adj[n][d] = [m for m, _, q in tiles if edge(p, d) == edge(q, OPPOSITE[d])]
    return {
        "name": name,
        "notes": notes,
        "tile_dim": 3,
        "tiles": [{"name": n, "weight": w, "pattern": p} for n, w, p in tiles],
        "adjacency": adj,
    }


PRESETS = {
    "obstacle": (obstacle, "Open floor with buffered blocks and thin wall fragments."),
    "labyrinth": (labyrinth, "One-cell corridors carved between solid tiles."),
    "warehouse": (warehouse, "Long horizontal shelf rows with aisles and pallet buffers."),
    "cavern": (cavern, "Corner-state blob tiles forming irregular caves."),
}

if __name__ == "__main__":
    here = os.path.dirname(os.path.abspath(__file__))
    for name, (fn, notes) in PRESETS.items():
        with open(os.path.join(here, name + ".json"), "w") as f:
            json.dump(build(name, fn(), notes), f, indent=1)
            f.write("\n")
