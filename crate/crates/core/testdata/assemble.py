#!/usr/bin/env python3
"""Hand assembler for the U-plane and C-plane golden frames.

Writes goldens.txt next to this script. Each line is
`name key=value ... hex=<frame>`; the Rust golden test rebuilds the same
message from the keys and compares bytes.
"""

import os


def lcg_samples(seed, count, shift):
    x = seed
    out = []
    for _ in range(count):
        x = (x * 1103515245 + 12345) % (1 << 31)
        v = ((x >> 8) % 65536) - 32768
        out.append(v >> shift)
    return out


def round_half_away(num, den):
    q, r = divmod(abs(num), den)
    if 2 * r >= den:
        q += 1
    return q if num >= 0 else -q


def bfp(block, width):
    # two's-complement magnitude bits: -2^k needs k, like 2^k - 1
    peak = max((v if v >= 0 else -v - 1).bit_length() for v in block)
    e = max(0, peak - (width - 1))
    e = min(e, 15)
    hi = (1 << (width - 1)) - 1
    lo = -(1 << (width - 1))
    mant = [min(hi, max(lo, round_half_away(v, 1 << e))) for v in block]
    bits = "".join(format(m & ((1 << width) - 1), "0{}b".format(width)) for m in mant)
    bits += "0" * (-len(bits) % 8)
    body = bytes(int(bits[i:i + 8], 2) for i in range(0, len(bits), 8))
    return bytes([e]) + body


def raw(block):
    return b"".join((v & 0xFFFF).to_bytes(2, "big") for v in block)


def headers(msg_type, eaxc, seq, direction, filt, frame, sf, slot, sym, payload):
    app = bytes([
        (direction << 7) | (1 << 4) | filt,
        frame,
        (sf << 4) | (slot >> 2),
        ((slot & 0x3) << 6) | sym,
    ])
    body = eaxc.to_bytes(2, "big") + bytes([seq, 0x80]) + app + payload
    return bytes([0x10, msg_type]) + len(body).to_bytes(2, "big") + body


def uplane(p):
    n = p["num_prb"]
    samples = lcg_samples(p["seed"], 24 * n, p["shift"])
    if p["width"] == 16:
        hdr = 0x00
        blocks = b"".join(raw(samples[24 * i:24 * i + 24]) for i in range(n))
    else:
        hdr = (p["width"] << 4) | 1
        blocks = b"".join(bfp(samples[24 * i:24 * i + 24], p["width"]) for i in range(n))
    sec = (p["section_id"] << 12) | p["start_prb"]
    payload = sec.to_bytes(3, "big") + bytes([n, hdr, 0]) + blocks
    return headers(0x00, p["eaxc"], p["seq"], p["dir"], 0, p["frame"], p["subframe"],
                   p["slot"], p["symbol"], payload)


def cplane_type1(p):
    sec = (p["section_id"] << 12) | p["start_prb"]
    section = sec.to_bytes(3, "big") + bytes([p["num_prb"]])
    section += ((0xFFF << 4) | p["num_symbol"]).to_bytes(2, "big") + (0).to_bytes(2, "big")
    payload = bytes([1, 1, (p["width"] << 4) | 1, 0]) + section
    return headers(0x02, p["eaxc"], p["seq"], p["dir"], 0, p["frame"], p["subframe"],
                   p["slot"], p["symbol"], payload)


CASES = [
    ("cplane_dl_type1", cplane_type1, dict(eaxc=0x0001, seq=0, dir=1, frame=0, subframe=0, slot=0,
                                            symbol=0, section_id=1, start_prb=0, num_prb=51,
                                            num_symbol=14, width=9)),
    ("uplane_dl_bfp9", uplane, dict(eaxc=0x0000, seq=17, dir=1, frame=12, subframe=3, slot=1,
                                     symbol=5, section_id=1, start_prb=0, num_prb=4, width=9,
                                     seed=1, shift=0)),
    ("uplane_ul_bfp9_small", uplane, dict(eaxc=0x0001, seq=255, dir=0, frame=255, subframe=9,
                                           slot=1, symbol=13, section_id=2, start_prb=10,
                                           num_prb=3, width=9, seed=7, shift=6)),
    ("uplane_dl_bfp14", uplane, dict(eaxc=0x1234, seq=3, dir=1, frame=1, subframe=0, slot=0,
                                      symbol=0, section_id=4095, start_prb=48, num_prb=3,
                                      width=14, seed=99, shift=2)),
    ("uplane_ul_bfp5", uplane, dict(eaxc=0x0002, seq=64, dir=0, frame=7, subframe=5, slot=0,
                                     symbol=7, section_id=3, start_prb=1, num_prb=2, width=5,
                                     seed=12345, shift=0)),
    ("uplane_dl_raw16", uplane, dict(eaxc=0x0000, seq=1, dir=1, frame=2, subframe=1, slot=1,
                                      symbol=1, section_id=1, start_prb=50, num_prb=1, width=16,
                                      seed=42, shift=0)),
]


def main():
    here = os.path.dirname(os.path.abspath(__file__))
    lines = []
    for name, build, params in CASES:
        frame = build(params)
        kind = "cplane" if build is cplane_type1 else "uplane"
        keys = " ".join("{}={}".format(k, v) for k, v in params.items())
        lines.append("{} kind={} {} hex={}".format(name, kind, keys, frame.hex()))
    with open(os.path.join(here, "goldens.txt"), "w") as f:
        f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
