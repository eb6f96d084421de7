"""Smoke test for the elmo2eds extension module.

Build and run:
    maturin develop -m crates/python/Cargo.toml
    python crates/python/python/smoke_test.py
"""

import json
import pathlib
import sys
import tempfile

import elmo2eds

FIXTURES = pathlib.Path(__file__).resolve().parents[3] / "fixtures"


def main():
    xml = (FIXTURES / "elmo" / "transcript_sweden.xml").read_bytes()
    out, warnings = elmo2eds.convert(xml)
    assert out.encode() == (FIXTURES / "golden" / "transcript_sweden.jsonld").read_bytes()
    assert warnings == 0

    cred = json.loads(out)
    assert cred["issuer"] == "did:ebsi:xyz-issuer"
    assert cred["proof"]["jws"] == "PLACEHOLDER"

    findings = json.loads(elmo2eds.validate((FIXTURES / "elmo" / "bad_country.xml").read_bytes()))
    assert findings[0]["code"] == "unknown-country", findings

    try:
        elmo2eds.convert(b"<elmo")
    except elmo2eds.ConversionError as e:
        assert str(e).startswith("malformed-xml"), e
    else:
        raise AssertionError("malformed input converted")

    k1 = str(FIXTURES / "keys" / "k1.jwk")
    k2 = str(FIXTURES / "keys" / "k2.jwk")
    dids = json.loads((FIXTURES / "golden" / "dids.json").read_text())
    issuer = elmo2eds.did_for_key(k1)
    assert issuer in json.dumps(dids)

    signed = json.loads(elmo2eds.sign(out, k1, elmo2eds.did_for_key(k2)))
    assert signed["issuer"] == issuer
    assert signed["proof"]["jws"].count(".") == 2

    with tempfile.TemporaryDirectory() as d:
        log = pathlib.Path(d) / "registry.jsonl"
        log.write_text("")
        assert elmo2eds.verify_log(str(log))
        log.write_text("{not json}\n")
        assert not elmo2eds.verify_log(str(log))

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
