//! Binary parameter checkpoints.
//!
//! Layout, all little-endian: the 8-byte magic `DUVNMLP1`, a `u64` layer
//! count, one `u64` per layer size, then every parameter as an `f64` in
//! the network's flat order.

use std::path::Path;

use super::Mlp;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"DUVNMLP1";

impl Mlp {
    pub fn to_bytes(&self) -> Vec<u8> {
        let sizes = self.layer_sizes();
        let mut out = Vec::with_capacity(16 + 8 * (sizes.len() + self.num_params()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(sizes.len() as u64).to_le_bytes());
        for &s in sizes {
            out.extend_from_slice(&(s as u64).to_le_bytes());
        }
        for &p in self.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |why: &str| Error::Argument(format!("malformed checkpoint: {why}"));
        let mut words = bytes
            .get(8..)
            .ok_or_else(|| bad("truncated header"))?
            .chunks(8)
            .map(|c| <[u8; 8]>::try_from(c).map_err(|_| bad("trailing bytes")));
        if &bytes[..8] != MAGIC {
            return Err(bad("wrong magic"));
        }
        let mut next_u64 = || -> Result<u64> {
            Ok(u64::from_le_bytes(words.next().ok_or_else(|| bad("truncated"))??))
        };
        let count = next_u64()? as usize;
        if count > 64 {
            return Err(bad("implausible layer count"));
        }
        let sizes = (0..count).map(|_| next_u64().map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
        let params = words
            .map(|w| w.map(f64::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        Mlp::from_parts(&sizes, params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn checkpoint_round_trips_bit_exactly(
            sizes in prop::collection::vec(1usize..6, 2..5),
            seed in any::<u64>(),
        ) {
            let net = Mlp::new(&sizes, seed).unwrap();
            let back = Mlp::from_bytes(&net.to_bytes()).unwrap();
            prop_assert_eq!(
                net.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>(),
                back.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>()
            );
            prop_assert_eq!(net.layer_sizes(), back.layer_sizes());
        }
    }

    #[test]
    fn file_round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        let net = Mlp::new(&[3, 4, 2], 2).unwrap();
        net.save(&path).unwrap();
        assert_eq!(Mlp::load(&path).unwrap(), net);

        let mut bytes = net.to_bytes();
        bytes.pop();
        assert!(Mlp::from_bytes(&bytes).is_err());
        let mut bytes = net.to_bytes();
        bytes[0] = b'X';
        assert!(Mlp::from_bytes(&bytes).is_err());
        assert!(Mlp::from_bytes(b"DUV").is_err());
    }
}
