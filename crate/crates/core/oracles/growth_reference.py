"""Step-by-step growth transcription used to freeze the sixteen-step reference.

Plain Python floats, no vector library. Run:
    python3 growth_reference.py > ../src/growth/reference.rs
"""
import math

p_gamma_cap, p_gravity, p_spiral, p_h, p_freq = 0.2, 0.05, 0.3, 1.0, 1.0
steps = 16
root = [0.0, 0.0, 0.0]
d = [0.0, 0.0, 1.0]

verts = [list(root)]
v = list(root)
grav_prev = [0.0, 0.0, 0.0]
for i in range(1, steps + 1):
    grav = [0.0, -i * p_gravity, 0.0]
    gain = max(p_gamma_cap, 1.0 - abs(d[1]))
    bent = [d[k] + grav_prev[k] * gain for k in range(3)]
    helix = [p_h * math.cos(i * p_freq), 1.0, p_h * math.sin(i * p_freq)]
    d = [bent[k] + p_spiral * (bent[k] - helix[k]) for k in range(3)]
    v = [v[k] + d[k] for k in range(3)]
    verts.append(list(v))
    grav_prev = grav

print("// Generated by oracles/growth_reference.py; do not edit.")
print("pub(crate) const SIXTEEN_STEP_REFERENCE: [[f64; 3]; %d] = [" % len(verts))
for p in verts:
    print("    [%s, %s, %s]," % tuple(repr(c) for c in p))
print("];")
