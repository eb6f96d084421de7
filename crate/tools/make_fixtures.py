#!/usr/bin/env python3
"""Regenerate the checked-in fixture corpus.

Writes code lists under fixtures/standards/, test keys under fixtures/keys/
and the XML-DSig signed ELMO fixtures under fixtures/elmo/.

Only run this when the corpus must change: keys are freshly generated, so
every golden file derived from them (see golden_oracle.py) must be rebuilt
afterwards.

Requires: pycountry, cryptography.
"""

import base64
import datetime
import hashlib
import json
import pathlib
import re

import pycountry
from cryptography import x509
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec, padding, rsa
from cryptography.x509.oid import NameOID

ROOT = pathlib.Path(__file__).resolve().parent.parent
FIX = ROOT / "fixtures"

DSIG_NS = "http://www.w3.org/2000/09/xmldsig#"
SHA256_URI = "http://www.w3.org/2001/04/xmlenc#sha256"
SHA1_URI = "http://www.w3.org/2000/09/xmldsig#sha1"
RSA_SHA256_URI = "http://www.w3.org/2001/04/xmldsig-more#rsa-sha256"


ISCED_F_2013 = """\
00	Generic programmes and qualifications
001	Basic programmes and qualifications
0011	Basic programmes and qualifications
002	Literacy and numeracy
0021	Literacy and numeracy
003	Personal skills and development
0031	Personal skills and development
01	Education
011	Education
0111	Education science
0112	Training for pre-school teachers
0113	Teacher training without subject specialisation
0114	Teacher training with subject specialisation
02	Arts and humanities
021	Arts
0211	Audio-visual techniques and media production
0212	Fashion, interior and industrial design
0213	Fine arts
0214	Handicrafts
0215	Music and performing arts
022	Humanities (except languages)
0221	Religion and theology
0222	History and archaeology
0223	Philosophy and ethics
023	Languages
0231	Language acquisition
0232	Literature and linguistics
03	Social sciences, journalism and information
031	Social and behavioural sciences
0311	Economics
0312	Political sciences and civics
0313	Psychology
0314	Sociology and cultural studies
032	Journalism and information
0321	Journalism and reporting
0322	Library, information and archival studies
04	Business, administration and law
041	Business and administration
0411	Accounting and taxation
0412	Finance, banking and insurance
0413	Management and administration
0414	Marketing and advertising
0415	Secretarial and office work
0416	Wholesale and retail sales
0417	Work skills
042	Law
0421	Law
05	Natural sciences, mathematics and statistics
051	Biological and related sciences
0511	Biology
0512	Biochemistry
052	Environment
0521	Environmental sciences
0522	Natural environments and wildlife
053	Physical sciences
0531	Chemistry
0532	Earth sciences
0533	Physics
054	Mathematics and statistics
0541	Mathematics
0542	Statistics
06	Information and Communication Technologies (ICTs)
061	Information and Communication Technologies (ICTs)
0611	Computer use
0612	Database and network design and administration
0613	Software and applications development and analysis
07	Engineering, manufacturing and construction
071	Engineering and engineering trades
0711	Chemical engineering and processes
0712	Environmental protection technology
0713	Electricity and energy
0714	Electronics and automation
0715	Mechanics and metal trades
0716	Motor vehicles, ships and aircraft
072	Manufacturing and processing
0721	Food processing
0722	Materials (glass, paper, plastic and wood)
0723	Textiles (clothes, footwear and leather)
0724	Mining and extraction
073	Architecture and construction
0731	Architecture and town planning
0732	Building and civil engineering
08	Agriculture, forestry, fisheries and veterinary
081	Agriculture
0811	Crop and livestock production
0812	Horticulture
082	Forestry
0821	Forestry
083	Fisheries
0831	Fisheries
084	Veterinary
0841	Veterinary
09	Health and welfare
091	Health
0911	Dental studies
0912	Medicine
0913	Nursing and midwifery
0914	Medical diagnostic and treatment technology
0915	Therapy and rehabilitation
0916	Pharmacy
0917	Traditional and complementary medicine and therapy
092	Welfare
0921	Care of the elderly and of disabled adults
0922	Child care and youth services
0923	Social work and counselling
10	Services
101	Personal services
1011	Domestic services
1012	Hair and beauty services
1013	Hotel, restaurants and catering
1014	Sports
1015	Travel, tourism and leisure
102	Hygiene and occupational health services
1021	Community sanitation
1022	Occupational health and safety
103	Security services
1031	Military and defence
1032	Protection of persons and property
104	Transport services
1041	Transport services
99	Field unknown
999	Field unknown
9999	Field unknown
"""

ECTS = """\
A	Excellent
B	Very good
C	Good
D	Satisfactory
E	Sufficient
FX	Fail - some more work required before the credit can be awarded
F	Fail - considerable further work is required
"""

ISO_IEC_5218 = """\
0	Not known
1	Male
2	Female
9	Not applicable
"""


def write_standards():
    out = FIX / "standards"
    out.mkdir(parents=True, exist_ok=True)
    countries = sorted(pycountry.countries, key=lambda c: c.alpha_2)
    (out / "ISO3166_1_ALPHA2.tsv").write_text(
        "".join(f"{c.alpha_2}\t{c.name}\n" for c in countries), encoding="utf-8"
    )
    (out / "ISO3166_1_NUMERIC.tsv").write_text(
        "".join(f"{c.numeric}\t{c.alpha_2}\n" for c in sorted(countries, key=lambda c: c.numeric)),
        encoding="utf-8",
    )
    langs = sorted(
        (l for l in pycountry.languages if hasattr(l, "alpha_2")), key=lambda l: l.alpha_2
    )
    (out / "ISO639_1.tsv").write_text(
        "".join(f"{l.alpha_2}\t{l.name}\n" for l in langs), encoding="utf-8"
    )
    (out / "ISCED_F_2013.tsv").write_text(ISCED_F_2013, encoding="utf-8")
    (out / "ECTS.tsv").write_text(ECTS, encoding="utf-8")
    (out / "ISO_IEC_5218.tsv").write_text(ISO_IEC_5218, encoding="utf-8")
    (out / "EQF.tsv").write_text(
        "".join(f"{i}\tEQF level {i}\n" for i in range(1, 9)), encoding="utf-8"
    )


def b64url(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode()


def write_ec_key(name: str):
    key = ec.generate_private_key(ec.SECP256K1())
    nums = key.private_numbers()
    pub = nums.public_numbers
    jwk = {
        "kty": "EC",
        "crv": "secp256k1",
        "x": b64url(pub.x.to_bytes(32, "big")),
        "y": b64url(pub.y.to_bytes(32, "big")),
        "d": b64url(nums.private_value.to_bytes(32, "big")),
    }
    keys = FIX / "keys"
    (keys / f"{name}.jwk").write_text(json.dumps(jwk, indent=2) + "\n")
    (keys / f"{name}.pem").write_bytes(
        key.private_bytes(
            serialization.Encoding.PEM,
            serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption(),
        )
    )


def write_rsa_cert(name: str, cn: str):
    key = rsa.generate_private_key(public_exponent=65537, key_size=2048)
    subject = x509.Name(
        [
            x509.NameAttribute(NameOID.COUNTRY_NAME, "SE"),
            x509.NameAttribute(NameOID.ORGANIZATION_NAME, "TEST ONLY"),
            x509.NameAttribute(NameOID.COMMON_NAME, cn),
        ]
    )
    now = datetime.datetime(2022, 1, 1, tzinfo=datetime.timezone.utc)
    cert = (
        x509.CertificateBuilder()
        .subject_name(subject)
        .issuer_name(subject)
        .public_key(key.public_key())
        .serial_number(x509.random_serial_number())
        .not_valid_before(now)
        .not_valid_after(now + datetime.timedelta(days=3650))
        .sign(key, hashes.SHA256())
    )
    keys = FIX / "keys"
    (keys / f"{name}.key.pem").write_bytes(
        key.private_bytes(
            serialization.Encoding.PEM,
            serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption(),
        )
    )
    (keys / f"{name}.cert.der").write_bytes(cert.public_bytes(serialization.Encoding.DER))
    return key, cert


def normalize_newlines(data: bytes) -> bytes:
    return data.replace(b"\r\n", b"\n").replace(b"\r", b"\n")


def sign_elmo(source: bytes, key, cert, digest_uri: str) -> bytes:
    """Enveloped signature under the constrained profile.

    digest = H(newline-normalized document with the Signature element cut out)
    signature = RSA-PKCS1v15-SHA256(newline-normalized SignedInfo element bytes)
    """
    close = source.rindex(b"</elmo>")
    prefix = source[:close] + b"  "
    suffix = b"\n" + source[close:]
    body = normalize_newlines(prefix + suffix)
    if digest_uri == SHA256_URI:
        digest = hashlib.sha256(body).digest()
    else:
        digest = hashlib.sha1(body).digest()
    signed_info = (
        "<SignedInfo>"
        '<CanonicalizationMethod Algorithm="http://www.w3.org/2001/10/xml-exc-c14n#"/>'
        f'<SignatureMethod Algorithm="{RSA_SHA256_URI}"/>'
        '<Reference URI="">'
        "<Transforms>"
        '<Transform Algorithm="http://www.w3.org/2000/09/xmldsig#enveloped-signature"/>'
        "</Transforms>"
        f'<DigestMethod Algorithm="{digest_uri}"/>'
        f"<DigestValue>{base64.b64encode(digest).decode()}</DigestValue>"
        "</Reference>"
        "</SignedInfo>"
    ).encode()
    sig = key.sign(normalize_newlines(signed_info), padding.PKCS1v15(), hashes.SHA256())
    der = cert.public_bytes(serialization.Encoding.DER)
    block = (
        f'<Signature xmlns="{DSIG_NS}">'.encode()
        + signed_info
        + b"<SignatureValue>"
        + base64.b64encode(sig)
        + b"</SignatureValue>"
        + b"<KeyInfo><X509Data><X509Certificate>"
        + base64.b64encode(der)
        + b"</X509Certificate></X509Data></KeyInfo>"
        + b"</Signature>"
    )
    return prefix + block + suffix


def verify_profile(doc: bytes) -> str:
    """Independent check of the same profile, used to vet generated fixtures."""
    m = re.search(rb"<Signature\b.*?</Signature>", doc, re.S)
    if not m:
        return "MissingSignature"
    block = m.group(0)
    body = normalize_newlines(doc[: m.start()] + doc[m.end():])
    dm = re.search(rb'<DigestMethod Algorithm="([^"]+)"', block).group(1).decode()
    if dm != SHA256_URI:
        return "UnsupportedAlgorithm"
    stated = base64.b64decode(re.search(rb"<DigestValue>(.*?)</DigestValue>", block, re.S).group(1))
    if hashlib.sha256(body).digest() != stated:
        return "DigestMismatch"
    si = re.search(rb"<SignedInfo>.*?</SignedInfo>", block, re.S).group(0)
    sig = base64.b64decode(re.search(rb"<SignatureValue>(.*?)</SignatureValue>", block, re.S).group(1))
    der = base64.b64decode(re.search(rb"<X509Certificate>(.*?)</X509Certificate>", block, re.S).group(1))
    pub = x509.load_der_x509_certificate(der).public_key()
    try:
        pub.verify(sig, normalize_newlines(si), padding.PKCS1v15(), hashes.SHA256())
    except Exception:
        return "SignatureInvalid"
    return "Valid"


def main():
    write_standards()
    (FIX / "keys").mkdir(parents=True, exist_ok=True)
    write_ec_key("k1")
    write_ec_key("k2")
    key, cert = write_rsa_cert("elmo_issuer", "Uppsala University ELMO signing (TEST ONLY)")
    write_rsa_cert("other_issuer", "Unrelated issuer (TEST ONLY)")
    src = (FIX / "elmo" / "transcript_sweden.xml").read_bytes()
    signed = sign_elmo(src, key, cert, SHA256_URI)
    (FIX / "elmo" / "transcript_sweden_signed.xml").write_bytes(signed)
    sha1 = sign_elmo(src, key, cert, SHA1_URI)
    (FIX / "elmo" / "transcript_sweden_sha1.xml").write_bytes(sha1)
    assert verify_profile(signed) == "Valid"
    assert verify_profile(sha1) == "UnsupportedAlgorithm"
    tampered = signed.replace(b"<resultLabel>B</resultLabel>", b"<resultLabel>A</resultLabel>", 1)
    assert verify_profile(tampered) == "DigestMismatch"
    print("fixtures written")


if __name__ == "__main__":
    main()
