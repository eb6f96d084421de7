#!/usr/bin/env python3
"""Independent oracle for the golden corpus.

Re-implements the documented mapping table (docs/mapping.md) with the Python
standard library and writes:

  fixtures/golden/<name>.jsonld        placeholder-mode conversion output
  fixtures/golden/dids.json            did:ebsi identifiers of the test keys
  fixtures/golden/transcript_sweden.k1.jws
                                       detached ES256K JWS of the Swedish
                                       transcript signed with k1 (RFC 6979)

It shares no code with the Rust crates; the Rust test-suite compares its
own output against these files byte for byte.

Requires: ecdsa (for RFC 6979 deterministic secp256k1 signing).
"""

import base64
import hashlib
import json
import pathlib
import sys
import xml.etree.ElementTree as ET
from collections import Counter, defaultdict
from datetime import datetime, timezone

import ecdsa
from ecdsa.util import sigencode_string_canonize

ROOT = pathlib.Path(__file__).resolve().parent.parent
FIX = ROOT / "fixtures"
DSIG_NS = "http://www.w3.org/2000/09/xmldsig#"

W3C_CONTEXT = "https://www.w3.org/2018/credentials/v1"
EBSI_CONTEXT = "https://essif.europa.eu/schemas/v-a/2020/v1"
SCHEMA_ID = "https://api.preprod.ebsi.eu/trusted-schemas-registry/v1/schemas/PLACEHOLDER"
SCHEMA_TYPE = "FullJsonSchemaValidator2021"
PROOF_TYPE = "EcdsaSecp256k1Signature2019"
ISSUER_SENTINEL = "did:ebsi:xyz-issuer"
HOLDER_SENTINEL = "did:ebsi:xyz-holder"

GENDER_WORDS = {0: "unknown", 1: "male", 2: "female", 9: "not applicable"}

CORPUS = {
    "transcript_sweden": "TranscriptOfRecords",
    "transcript_germany": "TranscriptOfRecords",
    "certificate_germany_abitur": "UpperSecondarySchoolCertificate",
    "certificate_finland": "UpperSecondarySchoolCertificate",
}


def load_tsv(name):
    out = {}
    for line in (FIX / "standards" / f"{name}.tsv").read_text(encoding="utf-8").splitlines():
        if line:
            code, label = line.split("\t", 1)
            out[code] = label
    return out


ISCED = load_tsv("ISCED_F_2013")
LANGS = load_tsv("ISO639_1")


def local(tag):
    return tag.rsplit("}", 1)[-1]


def text_of(e):
    return ((e.text or "") + "".join(c.tail or "" for c in e)).strip()


def join(prefix, seg):
    return seg if prefix == "" else f"{prefix}.{seg}"


def segs(children):
    """Yield (child, segment) with [k] suffixes only for repeated names."""
    counts = Counter(local(c.tag) for c in children)
    seen = defaultdict(int)
    for c in children:
        name = local(c.tag)
        if counts[name] == 1:
            yield c, name
        else:
            yield c, f"{name}[{seen[name]}]"
        seen[name] += 1


def attrs(e, prefix, out, skip=()):
    for k, v in e.attrib.items():
        name = local(k)
        if name in skip:
            continue
        v = v.strip()
        if v:
            out[f"{prefix}@{name}"] = v


def extras(e, path, out):
    attrs(e, path, out)
    t = text_of(e)
    if t:
        out[path] = t
    for c, seg in segs(list(e)):
        extras(c, f"{path}.{seg}", out)


def typed_leaf(e, path, out, skip=()):
    """Leftover attributes and nested elements of a typed leaf go to extras."""
    attrs(e, path, out, skip)
    for c, seg in segs(list(e)):
        extras(c, f"{path}.{seg}", out)
    return text_of(e)


class Doc:
    def __init__(self):
        self.leaves = {}  # flattened typed leaves, path -> text
        self.extras = {}
        self.los = []  # (path, depth, fields)


def fmt_decimal(text):
    s = repr(float(text))
    return s[:-2] if s.endswith(".0") else s


def parse_address(e, prefix, doc):
    kids = list(e)
    first = {}
    lines = 0
    attrs(e, prefix, doc.extras)
    for c, seg in segs(kids):
        name = local(c.tag)
        if name == "addressLine":
            doc.leaves[f"{prefix}.addressLine[{lines}]"] = typed_leaf(c, f"{prefix}.addressLine[{lines}]", doc.extras)
            lines += 1
        elif name in ("postalCode", "locality", "country") and name not in first:
            first[name] = True
            v = typed_leaf(c, f"{prefix}.{name}", doc.extras)
            if v:
                doc.leaves[f"{prefix}.{name}"] = v
        else:
            extras(c, f"{prefix}.{seg}", doc.extras)


def parse_party(e, prefix, singles, doc):
    attrs(e, prefix, doc.extras)
    seen = set()
    ids = 0
    for c, seg in segs(list(e)):
        name = local(c.tag)
        if name == "identifier":
            p = f"{prefix}.identifier[{ids}]"
            ids += 1
            doc.leaves[p] = typed_leaf(c, p, doc.extras, skip=("type",))
            if c.get("type", "").strip():
                doc.leaves[f"{p}@type"] = c.get("type").strip()
        elif name == "currentAddress" and name not in seen:
            seen.add(name)
            parse_address(c, f"{prefix}.currentAddress", doc)
        elif name in singles and name not in seen:
            seen.add(name)
            v = typed_leaf(c, f"{prefix}.{name}", doc.extras)
            if v:
                doc.leaves[f"{prefix}.{name}"] = v
        else:
            extras(c, f"{prefix}.{seg}", doc.extras)


def parse_loi(e, prefix, fields, doc):
    attrs(e, prefix, doc.extras)
    seen = set()
    kids = list(e)
    for c, seg in segs(kids):
        name = local(c.tag)
        p = f"{prefix}.{seg}"
        if name in ("resultLabel", "gradingSchemeLocalId", "status", "languageOfInstruction") and name not in seen:
            seen.add(name)
            v = typed_leaf(c, p, doc.extras)
            key = {
                "resultLabel": "result.grade",
                "gradingSchemeLocalId": "gradingScheme",
                "status": "result.status",
                "languageOfInstruction": "languageOfInstruction",
            }[name]
            if v:
                fields[key] = v
        elif name == "credit" and name not in seen:
            seen.add(name)
            attrs(c, p, doc.extras)
            got = set()
            for cc, cseg in segs(list(c)):
                cname = local(cc.tag)
                if cname in ("scheme", "value") and cname not in got:
                    got.add(cname)
                    v = typed_leaf(cc, f"{p}.{cseg}", doc.extras)
                    if v:
                        fields["result.creditScheme" if cname == "scheme" else "result.credits"] = v
                else:
                    extras(cc, f"{p}.{cseg}", doc.extras)
        elif name == "level" and "eqf" not in seen and any(
            local(x.tag) == "type" and text_of(x) == "EQF" for x in c
        ):
            seen.add("eqf")
            attrs(c, p, doc.extras)
            got = False
            for cc, cseg in segs(list(c)):
                if local(cc.tag) == "value" and not got:
                    got = True
                    fields["eqfLevel"] = typed_leaf(cc, f"{p}.{cseg}", doc.extras)
                else:
                    extras(cc, f"{p}.{cseg}", doc.extras)
        else:
            extras(c, p, doc.extras)


def parse_los(e, path, depth, doc):
    fields = {}
    entry = (path, depth, fields)
    doc.los.append(entry)
    attrs(e, path, doc.extras)
    seen = set()
    children = []
    for c, seg in segs(list(e)):
        name = local(c.tag)
        if name == "title" and name not in seen:
            seen.add(name)
            fields["title"] = typed_leaf(c, f"{path}.title", doc.extras, skip=("lang",))
            lang = c.get("{http://www.w3.org/XML/1998/namespace}lang", "").strip()
            if lang:
                fields["title@lang"] = lang
        elif name in ("type", "iscedCode") and name not in seen:
            seen.add(name)
            v = typed_leaf(c, f"{path}.{name}", doc.extras)
            if v:
                fields[name] = v
        elif name == "specifies" and name not in seen:
            seen.add(name)
            sp = f"{path}.specifies"
            attrs(c, sp, doc.extras)
            got = False
            for cc, cseg in segs(list(c)):
                if local(cc.tag) == "learningOpportunityInstance" and not got:
                    got = True
                    parse_loi(cc, f"{sp}.{cseg}", fields, doc)
                else:
                    extras(cc, f"{sp}.{cseg}", doc.extras)
        elif name == "hasPart":
            hp = f"{path}.{seg}"
            attrs(c, hp, doc.extras)
            for cc, cseg in segs(list(c)):
                if local(cc.tag) == "learningOpportunitySpecification":
                    children.append(cc)
                else:
                    extras(cc, f"{hp}.{cseg}", doc.extras)
        else:
            extras(c, f"{path}.{seg}", doc.extras)
    for j, c in enumerate(children):
        parse_los(c, f"{path}.children[{j}]", depth + 1, doc)
    for k, v in fields.items():
        doc.leaves[f"{path}.{k}"] = v


def parse(raw):
    root = ET.fromstring(raw)
    doc = Doc()
    attrs(root, "", doc.extras)
    seen = set()
    reports = 0
    attachments = 0
    issuer_taken = False
    for c, seg in segs(list(root)):
        name = local(c.tag)
        if c.tag == f"{{{DSIG_NS}}}Signature":
            continue
        if name == "generatedDate" and name not in seen:
            seen.add(name)
            doc.leaves["generatedDate"] = typed_leaf(c, "generatedDate", doc.extras)
        elif name == "learner" and name not in seen:
            seen.add(name)
            parse_party(c, "learner", ("citizenship", "givenNames", "familyName", "bday", "gender"), doc)
        elif name == "report":
            attrs(c, seg, doc.extras)
            for cc, cseg in segs(list(c)):
                cname = local(cc.tag)
                if cname == "issuer" and not issuer_taken:
                    issuer_taken = True
                    parse_party(cc, "issuer", ("country", "title", "url"), doc)
                elif cname == "learningOpportunitySpecification":
                    parse_los(cc, f"reports[{reports}]", 0, doc)
                    reports += 1
                else:
                    extras(cc, f"{seg}.{cseg}", doc.extras)
        elif name == "attachment":
            p = f"attachments[{attachments}]"
            attachments += 1
            attrs(c, p, doc.extras)
            got = set()
            for cc, cseg in segs(list(c)):
                cname = local(cc.tag)
                if cname in ("type", "content") and cname not in got:
                    got.add(cname)
                    v = typed_leaf(cc, f"{p}.{cname}", doc.extras)
                    if v:
                        doc.leaves[f"{p}.{cname}"] = v
                else:
                    extras(cc, f"{p}.{cseg}", doc.extras)
        else:
            extras(c, seg, doc.extras)
    return doc


def utc(ts):
    return datetime.fromisoformat(ts.replace("Z", "+00:00")).astimezone(timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ"
    )


def isced(code):
    if code in ISCED:
        return code
    if len(code) == 3 and "0" + code in ISCED:
        return "0" + code
    raise ValueError(code)


def grading(scheme):
    return "ECTS" if scheme.lower() == "ects" else f"local:{scheme}"


def credential_id(raw):
    b = bytearray(hashlib.sha256(raw).digest()[:16])
    b[6] = (b[6] & 0x0F) | 0x80
    b[8] = (b[8] & 0x3F) | 0x80
    h = b.hex()
    return f"urn:uuid:{h[:8]}-{h[8:12]}-{h[12:16]}-{h[16:20]}-{h[20:]}"


def convert(raw, doc_type):
    doc = parse(raw)
    recursive = doc_type == "TranscriptOfRecords"
    leaves = dict(doc.leaves)
    ext = dict(doc.extras)
    mapped = set()

    # document and learner rows
    subject = {"id": HOLDER_SENTINEL}
    issuance = utc(leaves["generatedDate"])
    mapped.add("generatedDate")
    ext["generatedDate"] = leaves["generatedDate"]  # carried
    if "learner.identifier[0]" in leaves:
        subject["identifier"] = leaves["learner.identifier[0]"]
        ext["learner.identifier[0]"] = leaves["learner.identifier[0]"]  # carried
        mapped.add("learner.identifier[0]")
    for src, dst in (
        ("learner.givenNames", "givenNames"),
        ("learner.familyName", "familyName"),
        ("learner.bday", "dateOfBirth"),
    ):
        if src in leaves:
            subject[dst] = leaves[src]
            mapped.add(src)
    if "learner.citizenship" in leaves:
        subject["citizenship"] = leaves["learner.citizenship"].upper()
        mapped.add("learner.citizenship")
    if "learner.gender" in leaves:
        subject["gender"] = GENDER_WORDS[int(leaves["learner.gender"])]
        mapped.add("learner.gender")

    # learning opportunity rows
    achievements = {}
    top = []
    for path, depth, f in doc.los:
        if depth > 0 and not recursive:
            continue
        a = {"title": f["title"]}
        mapped.add(f"{path}.title")
        if "iscedCode" in f:
            a["iscedfCode"] = isced(f["iscedCode"])
            mapped.add(f"{path}.iscedCode")
        if "eqfLevel" in f:
            a["eqfLevel"] = int(f["eqfLevel"])
            mapped.add(f"{path}.eqfLevel")
        if "languageOfInstruction" in f:
            a["languageOfInstruction"] = LANGS[f["languageOfInstruction"]]
            mapped.add(f"{path}.languageOfInstruction")
            ext[f"{path}.languageOfInstruction"] = f["languageOfInstruction"]  # carried
        if "gradingScheme" in f:
            a["gradingScheme"] = grading(f["gradingScheme"])
            mapped.add(f"{path}.gradingScheme")
        if "result.grade" in f:
            a["grade"] = f["result.grade"]
            mapped.add(f"{path}.result.grade")
        if "result.credits" in f:
            a["creditPoints"] = float(f["result.credits"])
            mapped.add(f"{path}.result.credits")
        achievements[path] = a
        if depth == 0:
            top.append(a)
        else:
            parent = path.rsplit(".children[", 1)[0]
            achievements[parent].setdefault("subAchievements", []).append(a)
    subject["achieved"] = top

    for path, value in leaves.items():
        if path in mapped:
            continue
        if path.endswith(".result.credits") or path.endswith(".eqfLevel"):
            value = fmt_decimal(value) if path.endswith("credits") else str(int(value))
        if path == "learner.gender":
            value = str(int(value))
        ext[path] = value

    cred = {
        "@context": [W3C_CONTEXT, EBSI_CONTEXT],
        "id": credential_id(raw),
        "type": ["VerifiableCredential", "VerifiableAttestation", doc_type],
        "issuer": ISSUER_SENTINEL,
        "issuanceDate": issuance,
        "credentialSubject": subject,
        "credentialSchema": {"id": SCHEMA_ID, "type": SCHEMA_TYPE},
    }
    if ext:
        cred["extension"] = {k: ext[k] for k in sorted(ext)}
    cred["proof"] = {
        "type": PROOF_TYPE,
        "created": issuance,
        "verificationMethod": f"{ISSUER_SENTINEL}#keys-1",
        "jws": "PLACEHOLDER",
    }
    return cred


def canonical(obj):
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def b64url(b):
    return base64.urlsafe_b64encode(b).rstrip(b"=").decode()


def b64url_decode(s):
    return base64.urlsafe_b64decode(s + "=" * (-len(s) % 4))


B58 = "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz"


def base58(data):
    n = int.from_bytes(data, "big")
    out = ""
    while n:
        n, r = divmod(n, 58)
        out = B58[r] + out
    pad = len(data) - len(data.lstrip(b"\0"))
    return "1" * pad + out


def load_key(name):
    jwk = json.loads((FIX / "keys" / f"{name}.jwk").read_text())
    sk = ecdsa.SigningKey.from_string(b64url_decode(jwk["d"]), curve=ecdsa.SECP256k1)
    return sk


def did_for(sk):
    compressed = sk.get_verifying_key().to_string("compressed")
    return "did:ebsi:z" + base58(hashlib.sha256(compressed).digest())


JWS_HEADER = b'{"alg":"ES256K","b64":false,"crit":["b64"]}'


def sign_detached(sk, payload):
    header = b64url(JWS_HEADER)
    sig = sk.sign_deterministic(
        header.encode() + b"." + payload, hashfunc=hashlib.sha256, sigencode=sigencode_string_canonize
    )
    return f"{header}..{b64url(sig)}"


def main():
    out = FIX / "golden"
    out.mkdir(exist_ok=True)
    for name, doc_type in CORPUS.items():
        raw = (FIX / "elmo" / f"{name}.xml").read_bytes()
        (out / f"{name}.jsonld").write_bytes(canonical(convert(raw, doc_type)))
    keys = {k: load_key(k) for k in ("k1", "k2")}
    dids = {k: did_for(sk) for k, sk in keys.items()}
    (out / "dids.json").write_text(json.dumps(dids, indent=2) + "\n")

    cred = json.loads((out / "transcript_sweden.jsonld").read_bytes())
    cred["proof"]["verificationMethod"] = dids["k1"] + "#keys-1"
    cred["proof"]["jws"] = ""
    jws = sign_detached(keys["k1"], canonical(cred))
    (out / "transcript_sweden.k1.jws").write_text(jws + "\n")
    print(json.dumps(dids, indent=2), file=sys.stderr)


if __name__ == "__main__":
    main()
