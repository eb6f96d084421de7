use sha2::{Digest, Sha256};

use super::CryptoError;
use crate::eds::Did;

pub const DID_METHOD_EBSI: &str = "ebsi";

/// `did:<method>:z<base58btc(sha256(public_key))>`.
///
/// For secp256k1 keys `public_key` is the 33-byte compressed SEC1 point.
pub fn derive_did(public_key: &[u8], method: &str) -> Result<Did, CryptoError> {
    if public_key.is_empty() {
        return Err(CryptoError::InvalidKey("public key is empty".into()));
    }
    let hash = Sha256::digest(public_key);
    let id = format!("z{}", bs58::encode(hash).into_string());
    Did::new(method, &id).map_err(CryptoError::Credential)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_vector() {
        assert!(derive_did(&[], "ebsi").is_err());
        let d = derive_did(b"abc", "ebsi").unwrap();
        // sha256("abc") = ba7816bf 8f01cfea ... 15ad
        let expected = bs58::encode(
            hex::decode("ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad")
                .unwrap(),
        )
        .into_string();
        assert_eq!(d.to_string(), format!("did:ebsi:z{expected}"));
    }

    #[test]
    fn one_byte_changes_the_did() {
        let a = derive_did(&[2u8; 33], "ebsi").unwrap();
        let mut k = [2u8; 33];
        k[32] = 3;
        assert_ne!(a, derive_did(&k, "ebsi").unwrap());
        assert_eq!(a, derive_did(&[2u8; 33], "ebsi").unwrap());
    }
}
