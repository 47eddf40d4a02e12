"""Independent computations of the constants frozen in the C++ tests.

Run: python3 tests/oracles/derived_values.py
"""
import math

import numpy as np


def srgb_to_lab(rgb):
    def linear(c):
        c = c / 255.0
        return c / 12.92 if c <= 0.04045 else ((c + 0.055) / 1.055) ** 2.4

    r, g, b = (linear(c) for c in rgb)
    x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b
    y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b
    z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b
    xn, yn, zn = 0.95047, 1.0, 1.08883
    eps, kappa = 216 / 24389, 24389 / 27

    def f(t):
        return t ** (1 / 3) if t > eps else (kappa * t + 16) / 116

    fx, fy, fz = f(x / xn), f(y / yn), f(z / zn)
    return 116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz)


def conv(cin, cout, k=3):
    return cin * cout * k * k + cout


def gridnet_params(rows=5, cols=6, depths=(16, 32, 64, 128, 256), classes=60):
    total = conv(1, depths[0])
    half = cols // 2
    for c in range(cols):
        for r in range(rows):
            if c > 0:
                total += 2 * conv(depths[r], depths[r])
            if r + 1 < rows and c < half:
                total += conv(depths[r], depths[r + 1]) + conv(depths[r + 1], depths[r + 1])
            if r + 1 < rows and c >= half:
                total += conv(depths[r + 1], depths[r]) + conv(depths[r], depths[r])
    return total + conv(depths[0], classes, 1)


def colornet_params(depths=(32, 64, 128, 256, 512)):
    enc, cin = 0, 1
    for d in depths:
        enc += conv(cin, d) + conv(d, d)
        cin = d
    fuse = sum(conv(2 * d, d, 1) for d in depths[:-1])
    dec = 0
    for i in range(len(depths) - 1, 0, -1):
        dec += conv(2 * depths[i], depths[i - 1]) + conv(depths[i - 1], depths[i - 1])
    dec += conv(2 * depths[0], depths[0]) + conv(depths[0], 2)
    return enc, enc + fuse + dec


def instance_norm(v, eps=1e-5):
    v = np.asarray(v, dtype=np.float64)
    return (v - v.mean()) / np.sqrt(v.var() + eps)


if __name__ == "__main__":
    print("mid_gray_lab", "%.10f %.3e %.3e" % srgb_to_lab((128, 128, 128)))
    print("gridnet_params", gridnet_params())
    enc, total = colornet_params()
    print("colornet_encoder_params", enc)
    print("colornet_params", total)
    print("instance_norm_1234", " ".join("%.10f" % x for x in instance_norm([1, 2, 3, 4])))
    print("encode_label_30", "%.12f" % (2 * 30 / 59 - 1))
    print("uniform_ce_60", "%.12f" % math.log(60))
