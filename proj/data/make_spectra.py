#!/usr/bin/env python3
"""Regenerates the bundled tube spectra.

Shapes follow Kramers' law for the bremsstrahlung photon fluence,
N(E) ~ (kVp - E) / E, attenuated by an aluminium inherent filter and, for the
high-energy tube setting, an additional copper filter. Characteristic lines
are not modelled. Attenuation coefficients are NIST mass attenuation values
interpolated log-log.
"""
import math

AL = [(10, 26.23), (15, 7.955), (20, 3.441), (30, 1.128), (40, 0.5685),
      (50, 0.3681), (60, 0.2778), (80, 0.2018), (100, 0.1704), (150, 0.1378)]
CU = [(10, 215.9), (15, 74.05), (20, 33.79), (30, 10.92), (40, 4.862),
      (50, 2.613), (60, 1.593), (80, 0.7630), (100, 0.4584), (150, 0.2217)]


def loglog(table, e):
    for (e0, m0), (e1, m1) in zip(table, table[1:]):
        if e0 <= e <= e1:
            t = math.log(e / e0) / math.log(e1 / e0)
            return math.exp(math.log(m0) + t * math.log(m1 / m0))
    raise ValueError(e)


def spectrum(kvp, al_mm, cu_mm, e_min=16, step=2):
    rows = []
    e = e_min
    while e < kvp:
        n = (kvp - e) / e
        n *= math.exp(-loglog(AL, e) * 2.699 * al_mm / 10.0)
        n *= math.exp(-loglog(CU, e) * 8.96 * cu_mm / 10.0)
        rows.append((e, n))
        e += step
    total = sum(n for _, n in rows)
    return [(e, n / total) for e, n in rows]


def write(path, header, rows):
    with open(path, "w") as f:
        for line in header:
            f.write("# " + line + "\n")
        f.write("# energy_keV  weight\n")
        for e, w in rows:
            f.write(f"{e:5.1f}  {w:.6e}\n")


common = ["Synthetic tube spectrum generated by data/make_spectra.py:",
          "Kramers bremsstrahlung shape, no characteristic lines,",
          "NIST attenuation for the filters. 2 keV bins."]
write("spectra/tube_80kv.txt", ["80 kVp, 2.5 mm Al inherent filtration."] + common,
      spectrum(80, 2.5, 0.0))
write("spectra/tube_140kv_cu1mm.txt",
      ["140 kVp, 2.5 mm Al inherent filtration plus 1 mm Cu."] + common,
      spectrum(140, 2.5, 1.0))
