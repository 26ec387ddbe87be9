"""Smoke test for the ofhsim extension.

Build and install first:  pip install --no-build-isolation ./crates/py
"""

from pathlib import Path

import ofhsim

ROOT = Path(__file__).resolve().parents[1]


def main():
    a = ofhsim.SlotPoint(1, 1023, 9, 1)
    b = ofhsim.SlotPoint.from_system_slot(1, 0)
    assert a.diff_to(b) == 1
    assert a.offset(1) == b

    num = ofhsim.Numerology(1, 23_040_000, 51)
    assert num.fft_size == 768
    assert sum(num.symbol_sizes()) == num.samples_per_subframe == 23_040
    slot, symbol, sample = num.locate(834)
    assert (slot.system_slot(), symbol, sample) == (0, 1, 0)

    ru = dict(ofhsim.delay_profile("tdd_scs30", "ru"))
    assert ru["t2a_max_up"] == 2454 and ru["ta3_min"] == 925
    warnings = {f: e for f, e, w in ofhsim.validate_pair("tdd_scs30") if w}
    assert warnings == {"t1a_max_cp_ul": 35, "t1a_max_up": 6}, warnings

    values = [(-1) ** i * 1000 * i for i in range(24)]
    exp, mant = ofhsim.bfp_compress(values, 9)
    back = ofhsim.bfp_decompress(exp, mant, 9)
    assert all(abs(x - y) <= 1 << max(exp - 1, 0) for x, y in zip(values, back))

    sc = ofhsim.Scenario.load(str(ROOT / "scenarios" / "tdd_dddsu.scenario"))
    sc.n_frames = 2
    res = sc.run(capture=True)
    assert res.ok and res.integrity_passed
    assert res.get("window", "uplane_dl", "on_time_pct") == "100.000"
    assert res.to_csv().startswith("entity,stream,counter,value")

    replay = ofhsim.analyze_capture(res.capture)
    assert "capture,all,records," in replay

    codec = ofhsim.Codec(1, 51)
    frames = [f for d, _, f in ofhsim.capture_records(res.capture) if d != "meta"]
    infos = [codec.decode(f) for f in frames]
    assert {i.plane for i in infos} == {"cplane", "uplane"}
    assert any(i.filter_index == 4 for i in infos)
    assert all(codec.reencode(f) == f for f in frames[:200])
    print(f"ofhsim smoke test passed: {len(frames)} frames, first {infos[0]!r}")


if __name__ == "__main__":
    main()
