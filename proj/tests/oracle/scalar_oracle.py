#!/usr/bin/env python3
"""High-precision reference values for the scalar loss/geometry examples.

Evaluated with mpmath at 50 significant digits straight from the closed-form
definitions; nothing here calls into the C++ library.  Run once and commit the
generated header:

    python3 tests/oracle/scalar_oracle.py > tests/oracle/scalar_oracle_values.hpp
"""
from mpmath import mp, mpf, log, cos, pi, sqrt

mp.dps = 50


def bce(p, y):
    return -y * log(p) - (1 - y) * log(1 - p)


def we_weight(p, tau1, tau2, gamma, alpha):
    if p < tau1:
        return (1 - alpha) * p ** gamma
    if p > tau2:
        return alpha * (1 - p) ** gamma
    return mpf(0)


def smooth_l1(d, beta):
    d = abs(d)
    return mpf("0.5") * d * d / beta if d < beta else d - mpf("0.5") * beta


def rect_area(b):
    return (b[2] - b[0]) * (b[3] - b[1])


def inter(a, b):
    w = max(mpf(0), min(a[2], b[2]) - max(a[0], b[0]))
    h = max(mpf(0), min(a[3], b[3]) - max(a[1], b[1]))
    return w * h


def giou(a, b):
    i = inter(a, b)
    u = rect_area(a) + rect_area(b) - i
    c = (max(a[2], b[2]) - min(a[0], b[0])) * (max(a[3], b[3]) - min(a[1], b[1]))
    return i / u - (c - u) / c


A = [mpf(0), mpf(0), mpf(2), mpf(2)]
B = [mpf(1), mpf(1), mpf(3), mpf(3)]
G = [mpf(0), mpf(0), mpf(2), mpf(3)]

tau, gamma, alpha = mpf("0.3"), mpf(6), mpf("0.1")
l_sup = (bce(mpf("0.8"), 1) + bce(mpf("0.2"), 0)) / 2

values = {
    "kIouOverlap": inter(A, B) / (rect_area(A) + rect_area(B) - inter(A, B)),
    "kGiouOverlap": giou(A, B),
    "kIouSecondGt": inter(A, G) / (rect_area(A) + rect_area(G) - inter(A, G)),
    "kLog2": log(2),
    "kBceP08Y0": bce(mpf("0.8"), 0),
    "kSmoothL1Half": smooth_l1(mpf("0.5"), 1),
    "kSmoothL1Two": smooth_l1(mpf(2), 1),
    "kGiouLossOverlap": 1 - giou(A, B),
    "kSupTwoSample": l_sup,
    "kWeWeightHigh": we_weight(mpf("0.9"), tau, tau, gamma, alpha),
    "kWeWeightLow": we_weight(mpf("0.1"), tau, tau, gamma, alpha),
    "kWeLossHigh": we_weight(mpf("0.9"), tau, tau, gamma, alpha) * (-mpf("0.9") * log(mpf("0.9"))),
    "kWeLossLow": we_weight(mpf("0.1"), tau, tau, gamma, alpha) * (-mpf("0.1") * log(mpf("0.1"))),
    "kQualitySoft": bce(mpf("0.7"), mpf("0.4")),
    "kTotalEta0125": mpf("0.125") * l_sup + mpf("0.1"),
    "kCosineLr49of50": mpf("0.004") * mpf("0.5") * (1 + cos(pi * 49 / 50)),
    "kCenternessQuarter": sqrt(mpf(1) / 3),
}

print("// Generated by tests/oracle/scalar_oracle.py (mpmath, 50 digits). Do not edit.")
print("#pragma once")
print()
print("namespace wend::oracle {")
print()
for name, v in values.items():
    print(f"inline constexpr double {name} = {mp.nstr(v, 20, min_fixed=-1, max_fixed=-1)};")
print()
print("}  // namespace wend::oracle")
