#!/usr/bin/env python3
"""Writes the bundled session scripts into sessions/.

Usage: tools/gen_sessions.py [output_dir]
"""

import math
import sys
from pathlib import Path

# Rotation of +90 degrees about world X: local -Z looks along world +Y and
# local +Y is world +Z. Cameras, heads and hands below all use it.
QX90 = (math.cos(math.pi / 4), math.sin(math.pi / 4), 0.0, 0.0)


def rx90(v):
    x, y, z = v
    return (x, -z, y)


def add(a, b):
    return tuple(p + q for p, q in zip(a, b))


def num(v):
    if v == 0:
        return "0"
    return repr(float(v)).removesuffix(".0")


def pose(p, q=QX90):
    return ",".join(num(v) for v in (*p, *q))


class Script:
    def __init__(self, title):
        self.lines = [f"# {title}"]
        self.t = 0.0

    def add(self, line):
        self.lines.append(line)

    def event(self, head, dom, ndom, **flags):
        fields = [f"event t={num(self.t)}", f"head={pose(head)}", f"dom={pose(dom)}", f"ndom={pose(ndom)}"]
        for key, value in flags.items():
            fields.append(f"{key.replace('_', '.')}={value}")
        self.add(" ".join(fields))
        self.t += 10.0

    def text(self):
        return "\n".join(self.lines) + "\n"


def wreck_reveal():
    """Two lenses in front of the default phantom; the MIP lens is dragged
    onto the derivative lens, and the combined lens shows the buried wreck."""
    n, spacing = 128, 0.01
    zc = -0.5 * (n - 1) * spacing + 0.62 * (n - 1) * spacing  # wreck center height
    head = (0.0, -3.0, zc)
    rest = (0.3, -2.6, zc - 0.3)
    ndom = (-0.3, -2.6, zc - 0.3)
    target = (0.0, -1.8, zc)
    start = (0.6, -1.8, zc)

    s = Script("wreck reveal: drag a MIP lens onto a derivative lens over the buried wreck")
    s.add("volume phantom=default")
    s.add(f"head pose={pose(head)}")
    s.add(f"lens id=1 pose={pose(target)} radius=0.4 front=derivative back=derivative")
    s.add(f"lens id=2 pose={pose(start)} radius=0.4 front=mip back=mip")
    s.add("camera fov=20 width=320 height=240")

    s.event(head, rest, ndom)
    s.add("snapshot name=separate")
    s.add("assert query=lens_count expected=2")
    s.event(head, start, ndom, dom_grab=1)
    s.add("assert query=mode expected=Grabbing")
    steps = 24
    for k in range(1, steps + 1):
        s.event(head, (start[0] - 0.025 * k, start[1], start[2]), ndom, dom_grab=1)
        if k == steps - 2:
            s.add("assert query=lens_count expected=2")
    s.add("assert query=lens_count expected=1")
    s.add("assert query=lens_stack id=2 expected=mip+derivative")
    s.event(head, rest, ndom)
    s.add("assert query=mode expected=Idle")
    s.add("assert query=lens_radius id=2 expected=0.4")
    s.add("snapshot name=revealed")
    return s.text()


def walkthrough():
    """Menu creation, moving, snapping, splitting and a two-hand resize."""
    head = (0.0, -2.6, 0.0)
    ndom_rest = (-0.2, -1.6, 0.0)
    dom_rest = (0.25, -1.7, -0.25)
    anchor = add(ndom_rest, rx90((0.0, 0.0, 0.15)))

    def section(angle_deg, r=0.07):
        a = math.radians(angle_deg)
        return add(anchor, rx90((r * math.cos(a), r * math.sin(a), 0.0)))

    s = Script("walkthrough: menu, grab, snap, split and resize")
    s.add("volume phantom=default")
    s.add(f"head pose={pose(head)}")
    s.add("camera fov=40 width=160 height=120")
    s.add("render step=0.01")

    def ev(dom=dom_rest, ndom=ndom_rest, **flags):
        s.event(head, dom, ndom, **flags)

    for _ in range(5):
        ev()
    s.add("assert query=mode expected=Idle")
    ev(ndom_menu="press")
    s.add("assert query=mode expected=MenuOpen")
    ev(dom=section(90), dom_trig=1)
    s.add("assert query=lens_count expected=1")
    s.add("assert query=lens_stack id=1 expected=mip")
    s.add(f"assert query=lens_pose id=1 expected={pose(anchor)} tol=1e-9")
    ev(dom=section(90))
    s.add("snapshot name=created")

    # Carry the new lens 0.4 m to the right, out of the menu.
    ev(dom=anchor, dom_grab=1)
    s.add("assert query=mode expected=Grabbing")
    moved = anchor
    for k in range(1, 21):
        moved = (anchor[0] + 0.02 * k, anchor[1], anchor[2])
        ev(dom=moved, dom_grab=1)
    ev(dom=moved)
    s.add("assert query=lens_count expected=1")
    s.add(f"assert query=lens_pose id=1 expected={pose(moved)} tol=1e-9")

    ev(dom=section(30), dom_trig=1)
    s.add("assert query=lens_count expected=2")
    s.add("assert query=lens_stack id=2 expected=derivative")
    ev(dom=section(30))
    ev(ndom_menu="press")
    s.add("assert query=mode expected=Idle")

    # Drag the derivative lens onto the MIP lens until they snap.
    ev(dom=anchor, dom_grab=1)
    for k in range(1, 17):
        ev(dom=(anchor[0] + 0.025 * k, anchor[1], anchor[2]), dom_grab=1)
        if k == 15:
            s.add("assert query=lens_count expected=2")
    s.add("assert query=lens_count expected=1")
    s.add("assert query=lens_stack id=2 expected=derivative+mip")
    ev()
    s.add("snapshot name=combined")

    # Split through the widget below the combined lens.
    center = moved
    ev(dom=add(center, rx90((0.0, -0.15, 0.0))), dom_trig=1)
    s.add("assert query=lens_count expected=2")
    s.add("assert query=lens_stack id=2 expected=derivative")
    s.add("assert query=lens_stack id=3 expected=mip")
    ev()

    # Two-hand resize of lens 2: hands start 0.1 m apart and end 0.2 m apart.
    ev(dom=center, dom_grab=1)
    left = add(center, (-0.1, 0.0, 0.0))
    ev(dom=center, ndom=left, dom_grab=1, ndom_grab=1)
    s.add("assert query=mode expected=TwoHandResize")
    for k in range(1, 11):
        ev(dom=center, ndom=add(left, (-0.01 * k, 0.0, 0.0)), dom_grab=1, ndom_grab=1)
    s.add("assert query=lens_radius id=2 expected=0.3 tol=1e-9")
    ev()
    s.add("assert query=mode expected=Idle")
    s.add("snapshot name=resized")

    # Look around for the rest of the session.
    while len([l for l in s.lines if l.startswith("event")]) < 200:
        a = 0.002 * (len(s.lines) % 40 - 20)
        s.event(add(head, (a, 0.0, 0.5 * a)), dom_rest, ndom_rest)
    s.add("assert query=lens_count expected=2")
    s.add("snapshot name=final")
    return s.text()


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "sessions"
    out.mkdir(parents=True, exist_ok=True)
    (out / "wreck_reveal.session").write_text(wreck_reveal())
    (out / "walkthrough.session").write_text(walkthrough())


if __name__ == "__main__":
    main()
